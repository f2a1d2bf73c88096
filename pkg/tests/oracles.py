"""Brute-force metric oracles that share no code with ocon.metrics."""


def counts(probs, labels, threshold=0.5):
    tp = fp = fn = tn = 0
    for p, y in zip(probs, labels):
        pred = p >= threshold
        if pred and y:
            tp += 1
        elif pred:
            fp += 1
        elif y:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def div(a, b):
    return a / b if b else 0.0


def rates(probs, labels):
    tp, fp, fn, tn = counts(probs, labels)
    n = tp + fp + fn + tn
    return {
        "accuracy": div(tp + tn, n), "precision": div(tp, tp + fp), "recall": div(tp, tp + fn),
        "f1": div(2 * tp, 2 * tp + fp + fn), "er": div(fp + fn, n), "fdr": div(fp, fp + tp),
        "for": div(fn, fn + tn), "npv": div(tn, tn + fn),
    }


def pair_auc(probs, labels):
    """P(score_pos > score_neg) + 0.5 P(tie) by counting every pair."""
    pos = [p for p, y in zip(probs, labels) if y]
    neg = [p for p, y in zip(probs, labels) if not y]
    wins = 0.0
    for a in pos:
        for b in neg:
            wins += 1.0 if a > b else 0.5 if a == b else 0.0
    return wins / (len(pos) * len(neg))
