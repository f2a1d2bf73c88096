"""End-to-end protocol shared by the CLI and the acceptance suite:
records -> scaled variant -> trained ensemble -> evaluation."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import neural
from .dataset import (CANONICAL_HEADER, CANONICAL_COLUMNS, HGCW_COLUMNS, ColumnMap, FeatureRecord,
                      SplitSpec, filter_nulls, ingest)
from .ensemble import OconEnsemble, one_hot_encode
from .features import FeatureMatrix, MinMaxParams, VariantKind, build_variant, min_max_fit_transform
from .metrics import ClassEvaluation, evaluate_classes
from .neural import MLPConfig
from .synthetic import synthetic_records
from .trainer import TrainReport, default_stops, train_ensemble

EVAL_SUBSET_STREAM = 2  # sub-seed stream for balanced evaluation subsets


def sniff_column_map(path) -> ColumnMap:
    """The canonical comma table (as written by ``ocon ingest``) or the raw HGCW layout."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                first = [c.strip() for c in line.split(",")]
                return CANONICAL_COLUMNS if tuple(first[:2]) == CANONICAL_HEADER[:2] else HGCW_COLUMNS
    return HGCW_COLUMNS


def load_records(path=None, column_map: ColumnMap | None = None, synthetic_seed: int | None = None):
    """Complete records, plus the number of null records dropped."""
    if path is None:
        if synthetic_seed is None:
            raise ValueError("need a data path or a synthetic seed")
        raw = synthetic_records(seed=synthetic_seed)
    else:
        raw = ingest(path, column_map or sniff_column_map(path))
    kept, dropped = filter_nulls(raw)
    return kept, len(dropped)


def scaled_matrix(records: list[FeatureRecord], variant, scaling: MinMaxParams | None = None) -> FeatureMatrix:
    """Build ``variant`` and min-max scale it, fitting on all rows unless ``scaling`` is given."""
    matrix = build_variant(records, VariantKind(variant))
    if scaling is None:
        matrix, _ = min_max_fit_transform(matrix)
        return matrix
    return replace(matrix, values=scaling.apply(matrix.values), scaling=scaling)


@dataclass
class ProtocolResult:
    ensemble: OconEnsemble
    reports: list[TrainReport]
    matrix: FeatureMatrix
    labels: np.ndarray
    probabilities: np.ndarray
    ocon_accuracy: float

    @property
    def class_test_accuracies(self) -> np.ndarray:
        return np.array([r.test_accuracy for r in self.reports])

    @property
    def mean_class_accuracy(self) -> float:
        return float(np.mean(self.class_test_accuracies))

    @property
    def failed(self) -> list[str]:
        return [r.class_name for r in self.reports if r.failed]


def train_protocol(records, variant, task: str, seed: int, config: MLPConfig | None = None,
                   stops=None, jobs: int = 1, split_spec: SplitSpec | None = None,
                   head: str = "argmax") -> ProtocolResult:
    """Train one ensemble with ``seed`` and score it on every record."""
    variant = VariantKind(variant)
    matrix = scaled_matrix(records, variant)
    labels = matrix.labels(task)
    names = FeatureMatrix.class_names(task)
    config = config or MLPConfig()
    config = MLPConfig.from_dict({**config.to_dict(), "input_dim": variant.dim})
    if stops is None:
        stops = default_stops(task, variant, names)
    ensemble = OconEnsemble.create(config, names, task=task, master_seed=seed, head=head)
    ensemble.meta = {
        "variant": variant.value,
        "scaling_min": matrix.scaling.mins.tolist(),
        "scaling_max": matrix.scaling.maxs.tolist(),
        "mlp": config.to_dict(),
    }
    reports = train_ensemble(ensemble, matrix.values, labels, stops, seed, jobs=jobs, split_spec=split_spec)
    probs = ensemble.probabilities(matrix.values)
    acc = float(np.mean(ensemble.decide(probs) == labels))
    return ProtocolResult(ensemble, reports, matrix, labels, probs, acc)


def checkpoint_scaling(ensemble: OconEnsemble) -> tuple[VariantKind, MinMaxParams]:
    meta = ensemble.meta
    return VariantKind(meta["variant"]), MinMaxParams(np.asarray(meta["scaling_min"], dtype=np.float64),
                                                      np.asarray(meta["scaling_max"], dtype=np.float64))


def balanced_eval_rows(labels, n_classes: int, seed: int) -> list[np.ndarray]:
    """Per class: its rows plus a balanced draw of the others (the training-time encoding)."""
    return [one_hot_encode(np.zeros((len(labels), 1)), labels, c, [seed, c, EVAL_SUBSET_STREAM],
                           classes=list(range(n_classes))).rows for c in range(n_classes)]


def evaluate_checkpoint(ensemble: OconEnsemble, records, rows: str = "balanced"):
    """Per-class evaluations, OCON accuracy and the (N, C) probabilities."""
    variant, scaling = checkpoint_scaling(ensemble)
    matrix = scaled_matrix(records, variant, scaling)
    labels = matrix.labels(ensemble.task)
    probs = ensemble.probabilities(matrix.values)
    per_class = None
    if rows == "balanced":
        per_class = balanced_eval_rows(labels, len(ensemble.class_names), ensemble.master_seed)
    elif rows != "all":
        raise ValueError("rows must be 'balanced' or 'all'")
    evals: list[ClassEvaluation] = evaluate_classes(probs, labels, ensemble.class_names, per_class)
    acc = float(np.mean(ensemble.decide(probs) == labels))
    return evals, acc, probs, labels


def ensemble_size(ensemble: OconEnsemble) -> tuple[int, int]:
    """Total parameters and per-sample multiply-adds over all class nets."""
    return (sum(neural.count_params(n) for n in ensemble.nets),
            sum(neural.count_muladds(n) for n in ensemble.nets))


def checkpoint_dir(path) -> Path:
    """Accept either a checkpoint directory or a ``train`` output directory."""
    path = Path(path)
    if (path / "checkpoint" / "manifest.json").exists():
        return path / "checkpoint"
    return path

