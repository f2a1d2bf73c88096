"""Dense binary classifier: input dropout -> [affine -> batch-norm -> ReLU -> dropout] x L
-> affine -> one logit, with hand-written backprop and Adam/RMSProp updates.

Parameters are named ``W1, b1, gamma1, beta1, ..., W{L+1}, b{L+1}``; weight
matrices are stored as (fan_out, fan_in).  Dropout probabilities are *keep*
probabilities and dropout is inverted (train-time scaling by 1/keep).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import container
from .errors import DimensionMismatch, StaleCache

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
RMSPROP_ALPHA = 0.99
RMSPROP_EPS = 1e-8
BN_EPS = 1e-5
BN_MOMENTUM = 0.9  # weight on the previous running statistic


@dataclass
class MLPConfig:
    input_dim: int = 3
    hidden_layers: tuple = (100,)
    lr: float = 1e-4
    optimizer: str = "adam"
    keep_input: float = 0.8
    keep_hidden: float = 0.5
    batch_norm: bool = True
    l2_lambda: float = 1e-4
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        self.hidden_layers = tuple(int(w) for w in self.hidden_layers)
        self.optimizer = self.optimizer.lower()
        if self.input_dim < 1 or any(w < 1 for w in self.hidden_layers):
            raise ValueError("layer widths must be >= 1")
        if not (0 < self.keep_input <= 1 and 0 < self.keep_hidden <= 1):
            raise ValueError("keep probabilities must lie in (0, 1]")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.optimizer not in ("adam", "rmsprop"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_layers"] = list(self.hidden_layers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MLPConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def kaiming_init(fan_out: int, fan_in: int, rng) -> np.ndarray:
    """He-normal weights: i.i.d. N(0, 2/fan_in)."""
    if fan_in < 1:
        raise ValueError("fan_in must be >= 1")
    rng = np.random.default_rng(rng)
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(x):
    return (np.asarray(x) > 0).astype(np.float64)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logit(z, y):
    """Elementwise binary cross-entropy on logits, overflow-free."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))


@dataclass
class ForwardCache:
    version: int
    x: np.ndarray
    input_mask: np.ndarray | None
    layers: list = field(default_factory=list)
    masks: list = field(default_factory=list)


class OneClassNet:
    def __init__(self, config: MLPConfig, rng=None):
        self.config = config
        rng = np.random.default_rng(config.seed if rng is None else rng)
        widths = (config.input_dim, *config.hidden_layers, 1)
        self.params: dict[str, np.ndarray] = {}
        self.running: dict[str, np.ndarray] = {}
        for l, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:]), start=1):
            self.params[f"W{l}"] = kaiming_init(fan_out, fan_in, rng)
            self.params[f"b{l}"] = np.zeros(fan_out)
            if config.batch_norm and l < len(widths) - 1:
                self.params[f"gamma{l}"] = np.ones(fan_out)
                self.params[f"beta{l}"] = np.zeros(fan_out)
                self.running[f"mean{l}"] = np.zeros(fan_out)
                self.running[f"var{l}"] = np.ones(fan_out)
        self.m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.step = 0
        self.version = 0
        self.dropout_rng = np.random.default_rng(rng.integers(2**63))

    @property
    def n_hidden(self) -> int:
        return len(self.config.hidden_layers)

    def weight_names(self):
        return [f"W{l}" for l in range(1, self.n_hidden + 2)]

    def mark_modified(self):
        self.version += 1


def _dropout_mask(rng, shape, keep):
    if keep >= 1.0:
        return None
    return (rng.random(shape) < keep) / keep


def forward(net: OneClassNet, x, train: bool = False, rng=None, masks=None, update_stats: bool = True):
    """Logits for a batch; in train mode also returns a :class:`ForwardCache`.

    ``masks`` (a cache's ``(input_mask, [hidden masks])``) pins dropout for
    reproducible replays; otherwise masks are drawn from ``rng`` or the net's
    own stream.
    """
    cfg = net.config
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != cfg.input_dim:
        raise DimensionMismatch(f"expected {cfg.input_dim} features, got {x.shape[1]}")
    p = net.params
    L = net.n_hidden

    if not train:
        a = x
        for l in range(1, L + 1):
            z = a @ p[f"W{l}"].T + p[f"b{l}"]
            if cfg.batch_norm:
                z = (z - net.running[f"mean{l}"]) / np.sqrt(net.running[f"var{l}"] + BN_EPS)
                z = p[f"gamma{l}"] * z + p[f"beta{l}"]
            a = relu(z)
        return (a @ p[f"W{L + 1}"].T + p[f"b{L + 1}"])[:, 0], None

    rng = net.dropout_rng if rng is None else rng
    if masks is None:
        input_mask = _dropout_mask(rng, x.shape, cfg.keep_input)
    else:
        input_mask = masks[0]
    cache = ForwardCache(version=net.version, x=x, input_mask=input_mask)
    a = x if input_mask is None else x * input_mask
    n = x.shape[0]
    for l in range(1, L + 1):
        layer = {"a_in": a}
        z = a @ p[f"W{l}"].T + p[f"b{l}"]
        if cfg.batch_norm:
            mu = z.mean(axis=0)
            var = z.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            xhat = (z - mu) * inv_std
            u = p[f"gamma{l}"] * xhat + p[f"beta{l}"]
            layer.update(xhat=xhat, inv_std=inv_std)
            if update_stats:
                unbiased = var * n / (n - 1) if n > 1 else var
                net.running[f"mean{l}"] = BN_MOMENTUM * net.running[f"mean{l}"] + (1 - BN_MOMENTUM) * mu
                net.running[f"var{l}"] = BN_MOMENTUM * net.running[f"var{l}"] + (1 - BN_MOMENTUM) * unbiased
        else:
            u = z
        h = relu(u)
        mask = _dropout_mask(rng, h.shape, cfg.keep_hidden) if masks is None else masks[1][l - 1]
        layer["u"] = u
        cache.masks.append(mask)
        a = h if mask is None else h * mask
        cache.layers.append(layer)
    cache.layers.append({"a_in": a})
    logits = (a @ p[f"W{L + 1}"].T + p[f"b{L + 1}"])[:, 0]
    return logits, cache


def l2_penalty(net: OneClassNet) -> float:
    lam = net.config.l2_lambda
    return 0.5 * lam * sum(float(np.sum(net.params[w] ** 2)) for w in net.weight_names())


def loss(net: OneClassNet, logits, y) -> float:
    """Mean BCE over the batch plus (lambda/2)*sum ||W||^2."""
    return float(np.mean(bce_with_logit(logits, y))) + l2_penalty(net)


def backward(net: OneClassNet, cache: ForwardCache, logits, y) -> dict[str, np.ndarray]:
    """Gradients of :func:`loss` for every parameter tensor."""
    if cache is None or cache.version != net.version:
        raise StaleCache("cache was produced before the latest parameter update")
    p = net.params
    cfg = net.config
    L = net.n_hidden
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    grads = {}

    dz = ((sigmoid(logits) - y) / n)[:, None]
    a_in = cache.layers[L]["a_in"]
    grads[f"W{L + 1}"] = dz.T @ a_in
    grads[f"b{L + 1}"] = dz.sum(axis=0)
    da = dz @ p[f"W{L + 1}"]

    for l in range(L, 0, -1):
        layer = cache.layers[l - 1]
        mask = cache.masks[l - 1]
        dh = da if mask is None else da * mask
        du = dh * (layer["u"] > 0)
        if cfg.batch_norm:
            xhat = layer["xhat"]
            grads[f"gamma{l}"] = np.sum(du * xhat, axis=0)
            grads[f"beta{l}"] = du.sum(axis=0)
            dxhat = du * p[f"gamma{l}"]
            dzl = layer["inv_std"] / n * (
                n * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0)
            )
        else:
            dzl = du
        grads[f"W{l}"] = dzl.T @ layer["a_in"]
        grads[f"b{l}"] = dzl.sum(axis=0)
        if l > 1:
            da = dzl @ p[f"W{l}"]

    lam = cfg.l2_lambda
    if lam:
        for w in net.weight_names():
            grads[w] = grads[w] + lam * p[w]
    return grads


def adam_step(net: OneClassNet, grads: dict[str, np.ndarray]) -> None:
    net.step += 1
    t = net.step
    lr = net.config.lr
    for name, g in grads.items():
        net.m[name] = ADAM_BETA1 * net.m[name] + (1 - ADAM_BETA1) * g
        net.v[name] = ADAM_BETA2 * net.v[name] + (1 - ADAM_BETA2) * g * g
        m_hat = net.m[name] / (1 - ADAM_BETA1**t)
        v_hat = net.v[name] / (1 - ADAM_BETA2**t)
        net.params[name] = net.params[name] - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    net.mark_modified()


def rmsprop_step(net: OneClassNet, grads: dict[str, np.ndarray]) -> None:
    net.step += 1
    lr = net.config.lr
    for name, g in grads.items():
        net.v[name] = RMSPROP_ALPHA * net.v[name] + (1 - RMSPROP_ALPHA) * g * g
        net.params[name] = net.params[name] - lr * g / (np.sqrt(net.v[name]) + RMSPROP_EPS)
    net.mark_modified()


def optimizer_step(net: OneClassNet, grads) -> None:
    if net.config.optimizer == "adam":
        adam_step(net, grads)
    else:
        rmsprop_step(net, grads)


def train_step(net: OneClassNet, x, y, rng=None) -> np.ndarray:
    """One forward/backward/update pass; returns per-sample BCE before the update."""
    logits, cache = forward(net, x, train=True, rng=rng)
    grads = backward(net, cache, logits, y)
    optimizer_step(net, grads)
    return bce_with_logit(logits, y)


def predict_proba(net: OneClassNet, x) -> np.ndarray:
    logits, _ = forward(net, x, train=False)
    return sigmoid(logits)


def count_params(net: OneClassNet) -> int:
    return int(sum(v.size for v in net.params.values()))


def count_muladds(net: OneClassNet) -> int:
    """Multiply-adds per sample through the affine layers."""
    return int(sum(net.params[w].size for w in net.weight_names()))


# --------------------------------------------------------------------------
# checkpoints


def to_tensors(net: OneClassNet) -> dict[str, np.ndarray]:
    tensors = dict(net.params)
    tensors.update({f"running_{k}": v for k, v in net.running.items()})
    tensors.update({f"opt_m_{k}": v for k, v in net.m.items()})
    tensors.update({f"opt_v_{k}": v for k, v in net.v.items()})
    return tensors


def save_net(net: OneClassNet, path, extra_meta: dict | None = None) -> None:
    meta = {"kind": "one_class_net", "config": net.config.to_dict(), "step": net.step}
    if extra_meta:
        meta.update(extra_meta)
    container.write(path, to_tensors(net), meta)


def load_net(path) -> tuple[OneClassNet, dict]:
    tensors, meta = container.read(path)
    net = OneClassNet(MLPConfig.from_dict(meta["config"]))
    for k in net.params:
        net.params[k] = tensors[k]
        net.m[k] = tensors[f"opt_m_{k}"]
        net.v[k] = tensors[f"opt_v_{k}"]
    for k in net.running:
        net.running[k] = tensors[f"running_{k}"]
    net.step = int(meta["step"])
    net.mark_modified()
    return net, meta
