"""Central finite-difference oracle for the MLP loss (independent of backward())."""

import numpy as np

from ocon import neural


def numeric_grads(net, x, y, masks, h=1e-5):
    def f():
        logits, _ = neural.forward(net, x, train=True, masks=masks, update_stats=False)
        return neural.loss(net, logits, y)

    grads = {}
    for name, p in net.params.items():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + h
            plus = f()
            p[i] = old - h
            minus = f()
            p[i] = old
            g[i] = (plus - minus) / (2 * h)
        grads[name] = g
    return grads


def max_relative_error(analytic, numeric, floor=1e-6):
    worst = 0.0
    for name in analytic:
        a, n = analytic[name], numeric[name]
        rel = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(rel.max()))
    return worst


KINK_MARGIN = 1e-3


def check(input_dim, seed, batch=8, batch_norm=True, keep=(0.8, 0.5), l2=1e-4):
    """Max relative error for one random net and batch.

    Central differences are invalid across a ReLU kink, so batches that put
    any hidden pre-activation within KINK_MARGIN of zero are redrawn.
    """
    rng = np.random.default_rng(seed)
    cfg = neural.MLPConfig(input_dim=input_dim, batch_norm=batch_norm, keep_input=keep[0],
                           keep_hidden=keep[1], l2_lambda=l2)
    net = neural.OneClassNet(cfg, rng=rng)
    # perturb the BN affine params away from their (1, 0) init so every path is exercised
    for k in net.params:
        if k.startswith(("gamma", "beta", "b")):
            net.params[k] = net.params[k] + 0.1 * rng.standard_normal(net.params[k].shape)
    for _ in range(1000):
        x = rng.random((batch, input_dim))
        y = (rng.random(batch) < 0.5).astype(float)
        logits, cache = neural.forward(net, x, train=True, rng=rng, update_stats=False)
        if min(np.abs(layer["u"]).min() for layer in cache.layers[:-1]) > KINK_MARGIN:
            break
    else:
        raise RuntimeError("could not draw a kink-free batch")
    analytic = neural.backward(net, cache, logits, y)
    masks = (cache.input_mask, cache.masks)
    return max_relative_error(analytic, numeric_grads(net, x, y, masks))
