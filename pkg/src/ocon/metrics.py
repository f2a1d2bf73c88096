"""Binary and ensemble evaluation: confusion counts, PRF1, ROC/AUC, DET and
error-rate summaries.  Predictions are positive when p >= threshold.

Ratios whose denominator is zero evaluate to 0 and are listed in the
result's ``undefined`` tuple.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, SingleClassInput


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _check(probabilities, labels):
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if p.shape != y.shape:
        raise LengthMismatch(f"{p.size} probabilities vs {y.size} labels")
    return p, y.astype(bool)


def confusion(probabilities, labels, threshold: float = 0.5) -> ConfusionCounts:
    p, y = _check(probabilities, labels)
    pred = p >= threshold
    return ConfusionCounts(
        tp=int(np.sum(pred & y)),
        fp=int(np.sum(pred & ~y)),
        fn=int(np.sum(~pred & y)),
        tn=int(np.sum(~pred & ~y)),
    )


def _ratio(num, den, name, undefined):
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


@dataclass(frozen=True)
class PRF1:
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: tuple[str, ...] = ()


def prf1(counts: ConfusionCounts) -> PRF1:
    undefined = []
    c = counts
    acc = _ratio(c.tp + c.tn, c.n, "accuracy", undefined)
    precision = _ratio(c.tp, c.tp + c.fp, "precision", undefined)
    recall = _ratio(c.tp, c.tp + c.fn, "recall", undefined)
    f1 = _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, "f1", undefined)
    return PRF1(acc, precision, recall, f1, tuple(undefined))


@dataclass(frozen=True)
class ErrorRates:
    er: float
    fdr: float
    for_: float
    npv: float
    undefined: tuple[str, ...] = ()


def det_err_rates(counts: ConfusionCounts) -> ErrorRates:
    """Error rate, false discovery rate, false omission rate, negative predictive value."""
    undefined = []
    c = counts
    er = _ratio(c.fp + c.fn, c.n, "er", undefined)
    fdr = _ratio(c.fp, c.fp + c.tp, "fdr", undefined)
    for_ = _ratio(c.fn, c.fn + c.tn, "for", undefined)
    npv = _ratio(c.tn, c.tn + c.fn, "npv", undefined)
    return ErrorRates(er, fdr, for_, npv, tuple(undefined))


@dataclass
class RocCurve:
    thresholds: np.ndarray  # descending; first entry is +inf
    tpr: np.ndarray
    fpr: np.ndarray


def roc_curve(probabilities, labels) -> RocCurve:
    """Operating points at every distinct score, from (0, 0) to (1, 1)."""
    p, y = _check(probabilities, labels)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("ROC needs both positive and negative labels")
    order = np.argsort(-p, kind="mergesort")
    p, y = p[order], y[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    last_of_run = np.r_[np.flatnonzero(np.diff(p)), p.size - 1]
    thresholds = np.r_[np.inf, p[last_of_run]]
    tpr = np.r_[0.0, tp[last_of_run] / n_pos]
    fpr = np.r_[0.0, fp[last_of_run] / n_neg]
    return RocCurve(thresholds, tpr, fpr)


def roc_auc(probabilities, labels) -> tuple[RocCurve, float]:
    curve = roc_curve(probabilities, labels)
    auc = float(np.sum(np.diff(curve.fpr) * (curve.tpr[1:] + curve.tpr[:-1]) / 2.0))
    return curve, auc


@dataclass
class DetCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    fnr: np.ndarray


def det_curve(probabilities, labels) -> DetCurve:
    """(FPR, FNR) pairs over the same thresholds as :func:`roc_curve`."""
    roc = roc_curve(probabilities, labels)
    return DetCurve(roc.thresholds, roc.fpr, 1.0 - roc.tpr)


def ocon_accuracy(ensemble, features, labels) -> float:
    """Fraction of rows whose decided class equals the label."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return float("nan")
    probs = ensemble.probabilities(features)
    return float(np.mean(ensemble.decide(probs) == labels))


# --------------------------------------------------------------------------
# per-class reports


@dataclass
class ClassEvaluation:
    name: str
    counts: ConfusionCounts
    scores: PRF1
    rates: ErrorRates
    auc: float
    roc: RocCurve
    det: DetCurve


def evaluate_classes(probs: np.ndarray, labels, class_names: Sequence[str], rows_per_class=None,
                     threshold: float = 0.5) -> list[ClassEvaluation]:
    """Evaluate each One-Class column of ``probs`` (N, C) as a binary detector.

    ``rows_per_class[c]`` restricts class ``c`` to a subset of rows (e.g. its
    balanced encoding); by default every row is used.
    """
    labels = np.asarray(labels)
    out = []
    for c, name in enumerate(class_names):
        rows = np.arange(labels.size) if rows_per_class is None else np.asarray(rows_per_class[c])
        p = probs[rows, c]
        y = labels[rows] == c
        counts = confusion(p, y, threshold)
        roc, auc = roc_auc(p, y)
        out.append(ClassEvaluation(name, counts, prf1(counts), det_err_rates(counts), auc, roc,
                                   det_curve(p, y)))
    return out


def write_accuracy_table(evals: Sequence[ClassEvaluation], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["one_class", "accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn"])
        for e in evals:
            s, c = e.scores, e.counts
            w.writerow([e.name, f"{s.accuracy:.4f}", f"{s.precision:.4f}", f"{s.recall:.4f}",
                        f"{s.f1:.4f}", c.tp, c.fp, c.fn, c.tn])


def write_rates_table(evals: Sequence[ClassEvaluation], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["one_class", "er", "fdr", "for", "npv", "auc"])
        for e in evals:
            r = e.rates
            w.writerow([e.name, f"{r.er:.2f}", f"{r.fdr:.2f}", f"{r.for_:.2f}", f"{r.npv:.2f}",
                        f"{e.auc:.4f}"])
