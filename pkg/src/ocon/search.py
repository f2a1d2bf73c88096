"""Staged ("informed") grid search over architecture and training
hyper-parameters.

Each stage sweeps the Cartesian product of a few HP value lists; every
combination is trained for every class on every fold of a k-fold partition of
that class's balanced subset.  The combination with the best mean fold
accuracy wins, and its values become fixed HPs for the next stage.

HP names are :class:`~ocon.neural.MLPConfig` fields plus ``hidden_nodes`` and
``n_hidden_layers`` (which together form ``hidden_layers``) and
``activation`` (only ``"relu"``).
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import kfold_indices
from .ensemble import one_hot_encode
from .errors import ConflictingHP, EmptySweep
from .neural import MLPConfig, OneClassNet
from .trainer import accuracy, train_fixed_epochs

log = logging.getLogger(__name__)

SMOKE_EPOCHS = 50
SMOKE_FOLDS = 2


@dataclass
class GridStage:
    name: str
    swept: dict[str, list]
    fixed: dict = field(default_factory=dict)
    folds: int = 3
    epochs: int = 1000
    classes: list | None = None  # class indices; None = every class of the task
    variant: str = "ss3"
    task: str = "phoneme"
    overrides: list = field(default_factory=list)

    def n_classes(self, default: int = 12) -> int:
        return default if self.classes is None else len(self.classes)

    def n_sets(self) -> int:
        return int(np.prod([len(v) for v in self.swept.values()], dtype=np.int64))

    def cycles(self, n_task_classes: int = 12) -> int:
        return self.n_sets() * self.n_classes(n_task_classes) * self.folds

    def smoke(self) -> "GridStage":
        return replace(self, epochs=SMOKE_EPOCHS, folds=SMOKE_FOLDS)

    @classmethod
    def from_dict(cls, d: dict) -> "GridStage":
        return cls(
            name=d["name"],
            swept={k: list(v) for k, v in d["swept"].items()},
            fixed=dict(d.get("fixed", {})),
            folds=int(d.get("folds", 3)),
            epochs=int(d.get("epochs", 1000)),
            classes=d.get("classes"),
            variant=d.get("variant", "ss3"),
            task=d.get("task", "phoneme"),
            overrides=list(d.get("overrides", [])),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name, "swept": self.swept, "fixed": self.fixed, "folds": self.folds,
            "epochs": self.epochs, "classes": self.classes, "variant": self.variant,
            "task": self.task, "overrides": self.overrides,
        }


def load_stages(path) -> list[GridStage]:
    """A JSON file holding one stage object or ``{"stages": [...]}``."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "stages" in data:
        return [GridStage.from_dict(d) for d in data["stages"]]
    if isinstance(data, list):
        return [GridStage.from_dict(d) for d in data]
    return [GridStage.from_dict(data)]


def reference_stages() -> list[GridStage]:
    """The four bundled stages: architecture/optimizer, dropout, batch-norm, L2."""
    text = resources.files("ocon").joinpath("stages/reference.json").read_text()
    return [GridStage.from_dict(d) for d in json.loads(text)["stages"]]


def enumerate_combinations(stage: GridStage) -> list[dict]:
    """Cartesian product of the swept lists; the last-declared HP varies fastest."""
    for name, values in stage.swept.items():
        if len(values) == 0:
            raise EmptySweep(f"stage {stage.name!r}: no values for {name!r}")
    names = list(stage.swept)
    return [dict(zip(names, combo)) for combo in itertools.product(*stage.swept.values())]


def mlp_config(hps: dict, input_dim: int, seed: int = 0) -> MLPConfig:
    hps = dict(hps)
    activation = hps.pop("activation", "relu")
    if activation != "relu":
        raise ValueError(f"unsupported activation {activation!r}")
    nodes = hps.pop("hidden_nodes", None)
    layers = hps.pop("n_hidden_layers", None)
    base = MLPConfig(input_dim=input_dim, seed=seed)
    widths = list(base.hidden_layers)
    if nodes is not None or layers is not None:
        nodes = nodes if nodes is not None else widths[0]
        layers = layers if layers is not None else len(widths)
        widths = [int(nodes)] * int(layers)
    unknown = set(hps) - set(MLPConfig.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown hyper-parameters: {sorted(unknown)}")
    hps.update(input_dim=input_dim, hidden_layers=widths, seed=seed)
    return MLPConfig.from_dict({**base.to_dict(), **hps})


@dataclass
class TrialResult:
    index: int
    combination: dict
    accuracies: np.ndarray  # (classes, folds)
    times: np.ndarray  # seconds, (classes, folds)
    failed: bool = False
    error: str | None = None

    @property
    def mean_accuracy(self) -> float:
        return 0.0 if self.failed else float(self.accuracies.mean())

    @property
    def mean_time(self) -> float:
        return float(self.times.mean())


@dataclass
class StageOutcome:
    stage: GridStage
    trials: list[TrialResult]
    best: dict
    inherited: dict

    @property
    def ranked(self) -> list[TrialResult]:
        return sorted(self.trials, key=lambda t: -t.mean_accuracy)  # stable: ties keep enumeration order

    def write_csv(self, path, class_names: Sequence[str]) -> None:
        classes = self.stage.classes if self.stage.classes is not None else range(len(class_names))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rank", "index", "combination", "mean_acc", "mean_time_s",
                        *(f"acc_{class_names[c]}" for c in classes)])
            for rank, t in enumerate(self.ranked, start=1):
                combo = ";".join(f"{k}={v}" for k, v in t.combination.items())
                per_class = [0.0] * len(list(classes)) if t.failed else t.accuracies.mean(axis=1)
                w.writerow([rank, t.index, combo, f"{t.mean_accuracy:.6f}", f"{t.mean_time:.4f}",
                            *(f"{a:.6f}" for a in per_class)])


def _cycle(args):
    hps, input_dim, x, y, train_rows, val_rows, epochs, seed = args
    start = time.perf_counter()
    config = mlp_config(hps, input_dim)
    net = OneClassNet(config, rng=np.random.default_rng(seed))
    train_fixed_epochs(net, x[train_rows], y[train_rows], epochs, np.random.default_rng([*seed, 7]))
    acc = accuracy(net, x[val_rows], y[val_rows])
    return acc, time.perf_counter() - start


def run_stage(stage: GridStage, features, labels, master_seed: int, n_task_classes: int | None = None,
              jobs: int = 1) -> StageOutcome:
    """Train and score every (combination, class, fold) cycle of ``stage``.

    All combinations see the same balanced subsets, folds and initial seeds,
    so they differ only in their HPs.  A combination whose cycles raise is
    scored 0 and the stage carries on.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    all_classes = sorted(np.unique(labels).tolist())
    if n_task_classes is not None and len(all_classes) != n_task_classes:
        raise ValueError(f"expected {n_task_classes} classes, found {len(all_classes)}")
    classes = all_classes if stage.classes is None else [int(c) for c in stage.classes]
    combos = enumerate_combinations(stage)
    log.info("stage %s: %d sets x %d classes x %d folds = %d cycles", stage.name, len(combos),
             len(classes), stage.folds, len(combos) * len(classes) * stage.folds)

    splits = {}
    for c in classes:
        enc = one_hot_encode(features, labels, c, np.random.default_rng([master_seed, c]),
                             classes=all_classes)
        folds = kfold_indices(len(enc.labels), stage.folds, [master_seed, c, 1])
        splits[c] = (enc, folds)

    jobs_args = []
    for j, combo in enumerate(combos):
        hps = {**stage.fixed, **combo}
        for ci, c in enumerate(classes):
            enc, folds = splits[c]
            for f, (tr, va) in enumerate(folds):
                jobs_args.append((hps, features.shape[1], enc.features, enc.labels, tr, va,
                                  int(hps.get("epochs", stage.epochs)), [master_seed, c, f]))

    results = _run_cycles(jobs_args, jobs)
    per_combo = len(classes) * stage.folds
    trials = []
    for j, combo in enumerate(combos):
        chunk = results[j * per_combo:(j + 1) * per_combo]
        errors = [r for r in chunk if isinstance(r, str)]
        if errors:
            shape = (len(classes), stage.folds)
            trials.append(TrialResult(j, combo, np.zeros(shape), np.zeros(shape), failed=True,
                                      error=errors[0]))
            continue
        acc = np.array([r[0] for r in chunk]).reshape(len(classes), stage.folds)
        times = np.array([r[1] for r in chunk]).reshape(len(classes), stage.folds)
        trials.append(TrialResult(j, combo, acc, times))

    best_trial = max(trials, key=lambda t: t.mean_accuracy)  # max() keeps the first on ties
    best = dict(best_trial.combination)
    log.info("stage %s winner: %s (mean acc %.4f)", stage.name, best, best_trial.mean_accuracy)
    return StageOutcome(stage=stage, trials=trials, best=best, inherited={**stage.fixed, **best})


def _safe_cycle(args):
    try:
        return _cycle(args)
    except Exception as exc:
        return f"{type(exc).__name__}: {exc}"


def _run_cycles(args_list, jobs):
    if jobs <= 1:
        return [_safe_cycle(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_safe_cycle, args_list, chunksize=max(1, len(args_list) // (jobs * 8))))


def inherit(outcome: StageOutcome, next_stage: GridStage) -> GridStage:
    """Carry the finished stage's fixed HPs and winner into ``next_stage``.

    The next stage's own fixed values take precedence; HPs it sweeps are
    dropped from the inherited set.  Re-sweeping a winning HP must be declared
    in ``next_stage.overrides``.
    """
    if not outcome.best:
        return next_stage
    clash = [k for k in outcome.best if k in next_stage.swept and k not in next_stage.overrides]
    if clash:
        raise ConflictingHP(f"stage {next_stage.name!r} re-sweeps inherited {clash} without override")
    fixed = {k: v for k, v in outcome.inherited.items() if k not in next_stage.swept}
    fixed.update(next_stage.fixed)
    return replace(next_stage, fixed=fixed)


def run_search(stages: Sequence[GridStage], matrices, master_seed: int, jobs: int = 1,
               smoke: bool = False, out_dir=None, class_names=None) -> list[StageOutcome]:
    """Run stages in order, inheriting winners.  ``matrices`` maps a variant
    name to ``(features, labels_by_task)`` or is a callable ``(variant, task) -> (x, y)``."""
    outcomes = []
    current = None
    for i, stage in enumerate(stages):
        stage = stage.smoke() if smoke else stage
        if current is not None:
            stage = inherit(current, stage)
        x, y = matrices(stage.variant, stage.task) if callable(matrices) else matrices[stage.variant]
        outcome = run_stage(stage, x, y, master_seed, jobs=jobs)
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            names = class_names or [str(c) for c in sorted(np.unique(y))]
            outcome.write_csv(out / f"stage{i + 1}_{stage.name}.csv", names)
        outcomes.append(outcome)
        current = outcome
    return outcomes
