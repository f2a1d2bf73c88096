"""Feature matrices built from formant records.

Four layouts are supported (see :class:`VariantKind`).  Every formant is
divided by the utterance's F0, then columns are min-max scaled; F0 itself,
when present, is appended last as raw Hz and scaled along with the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from . import container
from .dataset import FORMANT_KEYS, PHONEMES, SPEAKER_CLASSES, FeatureRecord
from .errors import EmptyColumn, NonPositiveInput


class VariantKind(Enum):
    SS3 = "ss3"
    SS3_F0 = "ss3-f0"
    TT12 = "tt12"
    TT12_F0 = "tt12-f0"

    @property
    def time_tracks(self) -> bool:
        return self in (VariantKind.TT12, VariantKind.TT12_F0)

    @property
    def has_f0(self) -> bool:
        return self in (VariantKind.SS3_F0, VariantKind.TT12_F0)

    @property
    def dim(self) -> int:
        return (12 if self.time_tracks else 3) + int(self.has_f0)

    @property
    def columns(self) -> tuple[str, ...]:
        keys = FORMANT_KEYS if self.time_tracks else ("F1@SS", "F2@SS", "F3@SS")
        cols = tuple(f"{k}/F0" for k in keys)
        return cols + ("F0",) if self.has_f0 else cols


def formant_ratio(formant_hz: float, f0_hz: float) -> float:
    """Linear formant normalization: formant over fundamental."""
    if not (f0_hz > 0 and formant_hz > 0):
        raise NonPositiveInput(f"formant ratio needs positive inputs, got ({formant_hz}, {f0_hz})")
    return formant_hz / f0_hz


@dataclass
class MinMaxParams:
    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Replay the fitted scaling; constant columns map to 0.  No clipping,
        so unseen rows may land outside [0, 1]."""
        values = np.asarray(values, dtype=np.float64)
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        out = (values - self.mins) / safe
        return np.where(span > 0, out, 0.0)


@dataclass
class ZScoreParams:
    means: np.ndarray
    stds: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        safe = np.where(self.stds > 0, self.stds, 1.0)
        return np.where(self.stds > 0, (np.asarray(values, dtype=np.float64) - self.means) / safe, 0.0)


@dataclass
class FeatureMatrix:
    values: np.ndarray
    variant: VariantKind
    phoneme_ids: np.ndarray
    speaker_ids: np.ndarray
    names: list[str] = field(default_factory=list)
    scaling: MinMaxParams | None = None

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def columns(self) -> tuple[str, ...]:
        return self.variant.columns

    def labels(self, task: str) -> np.ndarray:
        if task == "phoneme":
            return self.phoneme_ids
        if task == "speaker":
            return self.speaker_ids
        raise ValueError(f"unknown task {task!r}")

    @staticmethod
    def class_names(task: str) -> tuple[str, ...]:
        return PHONEMES if task == "phoneme" else SPEAKER_CLASSES

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return replace(
            self,
            values=self.values[rows],
            phoneme_ids=self.phoneme_ids[rows],
            speaker_ids=self.speaker_ids[rows],
            names=[self.names[i] for i in rows] if self.names else [],
        )

    def equals(self, other: "FeatureMatrix") -> bool:
        """Bit-exact equality of values, labels, metadata and scaling."""
        def same(a, b):
            a, b = np.asarray(a), np.asarray(b)
            return a.shape == b.shape and a.astype("<f8").tobytes() == b.astype("<f8").tobytes()

        if (self.variant, self.names) != (other.variant, other.names):
            return False
        if not (same(self.values, other.values) and same(self.phoneme_ids, other.phoneme_ids)
                and same(self.speaker_ids, other.speaker_ids)):
            return False
        if (self.scaling is None) != (other.scaling is None):
            return False
        if self.scaling is not None:
            return same(self.scaling.mins, other.scaling.mins) and same(self.scaling.maxs, other.scaling.maxs)
        return True


def build_variant(records: Sequence[FeatureRecord], kind: VariantKind) -> FeatureMatrix:
    """Unscaled feature matrix; column order is ``kind.columns``."""
    kind = VariantKind(kind)
    idx = list(range(12)) if kind.time_tracks else [2, 6, 10]  # SS entries of the formant tuple
    rows = []
    for r in records:
        try:
            row = [formant_ratio(r.formants[i], r.f0) for i in idx]
        except NonPositiveInput as exc:
            raise NonPositiveInput(f"record {r.name}: {exc}") from None
        if kind.has_f0:
            row.append(r.f0)
        rows.append(row)
    values = np.asarray(rows, dtype=np.float64).reshape(len(rows), kind.dim)
    return FeatureMatrix(
        values=values,
        variant=kind,
        phoneme_ids=np.asarray([r.phoneme_id for r in records], dtype=np.int64),
        speaker_ids=np.asarray([r.speaker_class_id for r in records], dtype=np.int64),
        names=[r.name for r in records],
    )


def min_max_fit_transform(matrix: FeatureMatrix, fit_rows=None) -> tuple[FeatureMatrix, MinMaxParams]:
    """Fit per-column min/max (on ``fit_rows`` if given, else all rows) and scale."""
    fit = matrix.values if fit_rows is None else matrix.values[np.asarray(fit_rows)]
    if fit.shape[0] < 2:
        raise ValueError("min-max scaling needs at least two rows")
    params = MinMaxParams(fit.min(axis=0), fit.max(axis=0))
    return replace(matrix, values=params.apply(matrix.values), scaling=params), params


def zscore_fit_transform(matrix: FeatureMatrix) -> tuple[FeatureMatrix, ZScoreParams]:
    params = ZScoreParams(matrix.values.mean(axis=0), matrix.values.std(axis=0))
    return replace(matrix, values=params.apply(matrix.values)), params


@dataclass
class Histogram:
    edges: np.ndarray
    masses: np.ndarray


def pmd(column, n_bins: int) -> Histogram:
    """Probability mass over ``n_bins`` equal-width bins spanning [min, max]."""
    column = np.asarray(column, dtype=np.float64).ravel()
    if column.size == 0:
        raise EmptyColumn("cannot build a histogram of an empty column")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    counts, edges = np.histogram(column, bins=n_bins)
    return Histogram(edges=edges, masses=counts / column.size)


def skewness(column) -> float:
    """Sample skewness (biased moment estimator)."""
    x = np.asarray(column, dtype=np.float64)
    d = x - x.mean()
    m2 = np.mean(d**2)
    return float(np.mean(d**3) / m2**1.5) if m2 > 0 else 0.0


def save_container(matrix: FeatureMatrix, path) -> None:
    tensors = {
        "values": matrix.values,
        "phoneme_ids": matrix.phoneme_ids,
        "speaker_ids": matrix.speaker_ids,
    }
    if matrix.scaling is not None:
        tensors["scaling_min"] = matrix.scaling.mins
        tensors["scaling_max"] = matrix.scaling.maxs
    meta = {
        "kind": "feature_matrix",
        "variant": matrix.variant.value,
        "columns": list(matrix.columns),
        "names": list(matrix.names),
    }
    container.write(path, tensors, meta)


def load_container(path) -> FeatureMatrix:
    tensors, meta = container.read(path)
    scaling = None
    if "scaling_min" in tensors:
        scaling = MinMaxParams(tensors["scaling_min"], tensors["scaling_max"])
    values = tensors["values"]
    variant = VariantKind(meta["variant"])
    return FeatureMatrix(
        values=values.reshape(-1, variant.dim),
        variant=variant,
        phoneme_ids=tensors["phoneme_ids"].astype(np.int64),
        speaker_ids=tensors["speaker_ids"].astype(np.int64),
        names=list(meta["names"]),
        scaling=scaling,
    )
