"""One-Class-One-Network ensembles: balanced per-class subsets, a bank of
independent binary nets, and the ArgMax / MaxNet decision heads."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import neural
from .errors import DimensionMismatch, EmptyVector, FalseClassTooSmall
from .neural import MLPConfig, OneClassNet


@dataclass
class EncodedSubset:
    features: np.ndarray
    labels: np.ndarray  # 1 = true class
    true_class: int
    false_counts: dict[int, int]
    rows: np.ndarray  # row indices into the source matrix

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return int(self.labels.size - self.labels.sum())


def false_class_size(true_size: int, n_classes: int) -> int:
    """round(true_size / (C - 1)), halves rounded up."""
    return int(math.floor(true_size / (n_classes - 1) + 0.5))


def one_hot_encode(features, labels, true_class: int, seed, max_imbalance: int = 3,
                   classes: Sequence[int] | None = None) -> EncodedSubset:
    """All rows of ``true_class`` (label 1) against an equal draw from each
    other class (label 0), sampled without replacement.

    Each false class contributes round(n_true / (C-1)) rows.  When that leaves
    more than ``max_imbalance`` rows between the two sides, randomly chosen
    false classes give or take one row each until the gap is within bounds.
    Row order is shuffled.
    """
    features = np.asarray(features)
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    if classes is None:
        classes = np.unique(labels).tolist()
    classes = [int(c) for c in classes]
    if true_class not in classes:
        raise ValueError(f"class {true_class} not present")
    false_classes = [c for c in classes if c != true_class]

    pos_rows = np.flatnonzero(labels == true_class)
    n_pos = pos_rows.size
    if n_pos == 0:
        raise ValueError(f"class {true_class} has no rows")
    base = false_class_size(n_pos, len(classes))
    counts = {c: base for c in false_classes}

    gap = base * len(false_classes) - n_pos
    if abs(gap) > max_imbalance:
        step = -1 if gap > 0 else 1
        n_adjust = abs(gap) - max_imbalance
        for c in rng.choice(false_classes, size=n_adjust, replace=False):
            counts[int(c)] += step

    neg_parts = []
    for c in false_classes:
        pool = np.flatnonzero(labels == c)
        if pool.size < counts[c]:
            raise FalseClassTooSmall(c, counts[c], pool.size)
        neg_parts.append(np.sort(rng.choice(pool, size=counts[c], replace=False)))
    neg_rows = np.concatenate(neg_parts) if neg_parts else np.empty(0, dtype=np.int64)

    rows = np.concatenate([pos_rows, neg_rows])
    y = np.concatenate([np.ones(n_pos), np.zeros(neg_rows.size)])
    order = rng.permutation(rows.size)
    rows, y = rows[order], y[order]
    return EncodedSubset(features=features[rows], labels=y, true_class=true_class,
                         false_counts=counts, rows=rows)


# --------------------------------------------------------------------------
# decision heads


def argmax(values) -> int:
    """Index of the maximum; first occurrence on ties."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyVector("argmax of an empty vector")
    return int(np.argmax(values))


@dataclass
class MaxNetConfig:
    epsilon: float | None = None  # default 1/n
    max_iters: int = 1000

    def __post_init__(self):
        if self.epsilon is not None and not (0 < self.epsilon < 1):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def maxnet(values, config: MaxNetConfig | None = None) -> int:
    """Winner-takes-all by lateral inhibition.

    Each round every node keeps itself (unit self-weight) and is inhibited by
    epsilon times the sum of the others, then rectified.  Stops when a single
    positive node remains.  Tied maxima never separate under these dynamics,
    so ties, an all-zero state, or running out of iterations fall back to
    :func:`argmax` on the input.  Negative inputs are shifted by their minimum.
    """
    config = config or MaxNetConfig()
    y = np.asarray(values, dtype=np.float64).ravel().copy()
    if y.size == 0:
        raise EmptyVector("maxnet of an empty vector")
    original = y.copy()
    if y.min() < 0:
        y -= y.min()
    n = y.size
    if n == 1:
        return 0
    eps = config.epsilon if config.epsilon is not None else 1.0 / n
    for _ in range(config.max_iters):
        positive = np.flatnonzero(y > 0)
        if positive.size == 1:
            return int(positive[0])
        if positive.size == 0 or np.count_nonzero(y == y.max()) > 1:
            break
        y = neural.relu(y - eps * (y.sum() - y))
    return argmax(original)


# --------------------------------------------------------------------------
# ensemble


@dataclass
class OconEnsemble:
    nets: list[OneClassNet]
    class_names: tuple[str, ...]
    task: str = "phoneme"
    head: str = "argmax"
    master_seed: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def create(cls, config: MLPConfig, class_names, task="phoneme", master_seed=0, head="argmax"):
        """One net per class, each seeded from (master_seed, class index)."""
        nets = [OneClassNet(config, rng=np.random.default_rng([master_seed, i]))
                for i in range(len(class_names))]
        return cls(nets=nets, class_names=tuple(class_names), task=task, head=head,
                   master_seed=master_seed)

    @property
    def input_dim(self) -> int:
        return self.nets[0].config.input_dim

    def probabilities(self, x) -> np.ndarray:
        """(N, C) matrix of per-class sigmoid outputs."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.input_dim:
            raise DimensionMismatch(f"expected {self.input_dim} features, got {x.shape[1]}")
        return np.column_stack([neural.predict_proba(net, x) for net in self.nets])

    def decide(self, probs) -> np.ndarray:
        probs = np.atleast_2d(probs)
        if self.head == "maxnet":
            return np.asarray([maxnet(p) for p in probs], dtype=np.int64)
        return np.argmax(probs, axis=1)

    def save(self, directory, extra_meta: dict | None = None) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        files = []
        for i, (name, net) in enumerate(zip(self.class_names, self.nets)):
            fname = f"class_{i:02d}_{name}.ocfs"
            neural.save_net(net, directory / fname, {"class_index": i, "class_name": name})
            files.append(fname)
        manifest = {
            "task": self.task,
            "class_names": list(self.class_names),
            "head": self.head,
            "master_seed": self.master_seed,
            "files": files,
            **self.meta,
            **(extra_meta or {}),
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory) -> "OconEnsemble":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        nets = [neural.load_net(directory / f)[0] for f in manifest["files"]]
        reserved = {"task", "class_names", "head", "master_seed", "files"}
        return cls(nets=nets, class_names=tuple(manifest["class_names"]), task=manifest["task"],
                   head=manifest["head"], master_seed=manifest["master_seed"],
                   meta={k: v for k, v in manifest.items() if k not in reserved})


def infer(ensemble: OconEnsemble, rows, head: str | None = None):
    """Probability vector(s) and decided class index for one row or a batch."""
    rows = np.asarray(rows, dtype=np.float64)
    single = rows.ndim == 1
    probs = ensemble.probabilities(rows)
    if head is not None and head != ensemble.head:
        decided = OconEnsemble(ensemble.nets, ensemble.class_names, head=head).decide(probs)
    else:
        decided = ensemble.decide(probs)
    if single:
        return probs[0], int(decided[0])
    return probs, decided
