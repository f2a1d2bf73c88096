"""Early-stopped training of single One-Class nets and whole ensembles.

A *batch-set* is one pass of: draw a fresh balanced subset, split it
70/15/15, then run up to ``epochs`` epochs of mini-batch updates.  Training
escapes once the mean loss over the last ``loss_window`` training samples is
below ``loss_threshold`` *and* accuracy on the held-out test split, checked
after each epoch's final mini-batch, is above ``accuracy_threshold``.  If a
batch-set ends without escaping, the subset is redrawn and training continues
on the same net.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import neural
from .dataset import SplitSpec, split_indices
from .ensemble import EncodedSubset, OconEnsemble, one_hot_encode
from .neural import OneClassNet

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_BATCH_SETS = "max_batch_sets"
WALL_CLOCK = "wall_clock"
FAILED = "failed"


@dataclass
class EarlyStopSpec:
    loss_threshold: float = 0.2
    accuracy_threshold: float = 0.9
    loss_window: int = 50  # samples, not batches
    max_batch_sets: int = 30
    max_wall_seconds: float = 1800.0
    epochs: int = 1000
    balancing_tol: float = 0.01

    def __post_init__(self):
        if self.loss_threshold < 0 or not (0 <= self.accuracy_threshold <= 1):
            raise ValueError("thresholds out of range")
        if self.loss_window < 1 or self.max_batch_sets < 1 or self.epochs < 1:
            raise ValueError("loss_window, max_batch_sets and epochs must be >= 1")
        if not (0 < self.balancing_tol < 1):
            raise ValueError("balancing_tol must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "EarlyStopSpec":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


# thresholds used for the reference experiments
PHONEME_SS_STOP = EarlyStopSpec(loss_threshold=0.2, accuracy_threshold=0.90)
PHONEME_TT_STOP = EarlyStopSpec(loss_threshold=0.15, accuracy_threshold=0.95)
SPEAKER_STOPS = {
    "children": EarlyStopSpec(loss_threshold=0.36, accuracy_threshold=0.80),
    "men": EarlyStopSpec(loss_threshold=0.08, accuracy_threshold=0.97),
    "women": EarlyStopSpec(loss_threshold=0.45, accuracy_threshold=0.80),
}


def default_stops(task: str, variant, class_names: Sequence[str]) -> list[EarlyStopSpec]:
    if task == "speaker":
        return [SPEAKER_STOPS[name] for name in class_names]
    spec = PHONEME_TT_STOP if getattr(variant, "time_tracks", False) else PHONEME_SS_STOP
    return [spec] * len(class_names)


@dataclass
class TrainReport:
    class_index: int
    class_name: str
    stop_reason: str = ""
    epochs_run: int = 0
    batch_sets: int = 0
    final_loss: float = float("nan")
    test_accuracy: float = float("nan")
    dev_accuracy: float = float("nan")
    wall_seconds: float = 0.0
    steps: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    test_accs: list = field(default_factory=list)
    reencode_steps: list = field(default_factory=list)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.stop_reason == FAILED

    def to_dict(self, curves: bool = False) -> dict:
        d = asdict(self)
        if not curves:
            for k in ("steps", "losses", "test_accs"):
                d.pop(k)
        return d

    def write_curve(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "loss", "test_acc"])
            for row in zip(self.steps, self.losses, self.test_accs):
                w.writerow([row[0], repr(row[1]), repr(row[2])])


def balancing_check(encoded: EncodedSubset, tolerance: float) -> bool:
    """|positives - negatives| / total within ``tolerance``."""
    if not (0 < tolerance < 1):
        raise ValueError("tolerance must lie in (0, 1)")
    pos, neg = encoded.n_positive, encoded.n_negative
    return abs(pos - neg) / (pos + neg) <= tolerance


def encode_balanced(features, labels, true_class, rng, tolerance, classes=None) -> EncodedSubset:
    """Encode, re-encoding with a tighter imbalance cap until the balance check passes."""
    for cap in (3, 2, 1, 0):
        encoded = one_hot_encode(features, labels, true_class, rng, max_imbalance=cap, classes=classes)
        if balancing_check(encoded, tolerance):
            return encoded
    return encoded


def _batches(order: np.ndarray, size: int, min_size: int):
    cuts = list(range(0, order.size, size))
    chunks = [order[c:c + size] for c in cuts]
    if len(chunks) > 1 and chunks[-1].size < min_size:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def accuracy(net: OneClassNet, x, y, threshold: float = 0.5) -> float:
    if len(y) == 0:
        return float("nan")
    return float(np.mean((neural.predict_proba(net, x) >= threshold) == (np.asarray(y) > 0.5)))


def train_one_class(net: OneClassNet, features, labels, true_class: int, stop: EarlyStopSpec,
                    seed, classes=None, split_spec: SplitSpec | None = None,
                    class_name: str | None = None, clock=time.monotonic) -> TrainReport:
    """Train ``net`` in place as the detector for ``true_class``."""
    split_spec = split_spec or SplitSpec()
    seed = [int(s) for s in np.atleast_1d(seed)]
    report = TrainReport(class_index=int(true_class), class_name=class_name or str(true_class))
    min_batch = 2 if net.config.batch_norm else 1
    window = deque(maxlen=stop.loss_window)
    start = clock()
    epoch_counter = 0

    for batch_set in range(stop.max_batch_sets):
        rng = np.random.default_rng([*seed, batch_set])
        encoded = encode_balanced(features, labels, true_class, rng, stop.balancing_tol, classes)
        x, y = encoded.features, encoded.labels
        tr, dv, te = split_indices(len(y), split_spec, seed=rng)
        report.batch_sets = batch_set + 1
        report.reencode_steps.append(epoch_counter)

        for _ in range(stop.epochs):
            for batch in _batches(rng.permutation(tr), net.config.batch_size, min_batch):
                window.extend(neural.train_step(net, x[batch], y[batch], rng))
                if clock() - start > stop.max_wall_seconds:
                    report.stop_reason = WALL_CLOCK
                    break
            epoch_counter += 1
            w_loss = float(np.mean(window))
            test_acc = accuracy(net, x[te], y[te])
            report.steps.append(epoch_counter)
            report.losses.append(w_loss)
            report.test_accs.append(test_acc)
            report.final_loss, report.test_accuracy = w_loss, test_acc
            if report.stop_reason == WALL_CLOCK:
                break
            if w_loss < stop.loss_threshold and test_acc > stop.accuracy_threshold:
                report.stop_reason = CONVERGED
                break
        report.dev_accuracy = accuracy(net, x[dv], y[dv])
        if report.stop_reason:
            break
    else:
        report.stop_reason = MAX_BATCH_SETS

    report.epochs_run = epoch_counter
    report.wall_seconds = clock() - start
    return report


def _train_worker(args):
    net, features, labels, class_index, stop, seed, classes, split_spec, name = args
    try:
        report = train_one_class(net, features, labels, class_index, stop, seed, classes,
                                 split_spec, class_name=name)
    except Exception as exc:  # one failing class must not take down its siblings
        report = TrainReport(class_index=class_index, class_name=name, stop_reason=FAILED,
                             error=f"{type(exc).__name__}: {exc}")
    return net, report


def train_ensemble(ensemble: OconEnsemble, features, labels, stops, master_seed: int,
                   jobs: int = 1, split_spec: SplitSpec | None = None) -> list[TrainReport]:
    """Train every class net; results do not depend on ``jobs``."""
    n = len(ensemble.nets)
    if n == 0:
        return []
    if isinstance(stops, EarlyStopSpec):
        stops = [stops] * n
    if len(stops) != n:
        raise ValueError(f"{len(stops)} stop specs for {n} classes")
    classes = list(range(n))
    tasks = [
        (ensemble.nets[i], features, labels, i, stops[i], [master_seed, i, 1], classes, split_spec,
         ensemble.class_names[i])
        for i in range(n)
    ]
    if jobs <= 1:
        results = [_train_worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, n)) as pool:
            results = list(pool.map(_train_worker, tasks))
    reports = []
    for i, (net, report) in enumerate(results):
        ensemble.nets[i] = net
        reports.append(report)
        log.info("class %s: %s after %d epochs (%d batch-sets), test acc %.4f",
                 report.class_name, report.stop_reason, report.epochs_run, report.batch_sets,
                 report.test_accuracy)
    return reports


def write_reports(reports: Sequence[TrainReport], path) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2)


def train_fixed_epochs(net: OneClassNet, x, y, epochs: int, rng) -> None:
    """Plain mini-batch training for a fixed number of epochs (grid-search cycles)."""
    rng = np.random.default_rng(rng)
    min_batch = 2 if net.config.batch_norm else 1
    idx = np.arange(len(y))
    for _ in range(epochs):
        for batch in _batches(rng.permutation(idx), net.config.batch_size, min_batch):
            neural.train_step(net, x[batch], y[batch], rng)
