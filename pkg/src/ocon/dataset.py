"""HGCW-style formant tables: filename decoding, ingestion, filtering,
class statistics and deterministic splits.

Formant values are stored per record as a flat 12-tuple ordered formant-major:
``F1@10, F1@50, F1@SS, F1@80, F2@10, ..., F3@80``.  A value of 0 marks a failed
measurement.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DataError,
    EmptyInput,
    KTooLarge,
    MalformedRow,
    MissingColumn,
    NonNumericSpeakerId,
    UnknownArpabetCode,
    UnknownGroupChar,
)

PHONEMES = ("ae", "ah", "aw", "eh", "er", "ei", "ih", "iy", "oa", "oo", "uh", "uw")
PHONEME_IDS = {code: i for i, code in enumerate(PHONEMES)}

SPEAKER_CLASSES = ("children", "men", "women")
SPEAKER_CLASS_IDS = {name: i for i, name in enumerate(SPEAKER_CLASSES)}

SAMPLE_POINTS = ("10", "50", "SS", "80")
FORMANT_KEYS = tuple(f"F{i}@{p}" for i in (1, 2, 3) for p in SAMPLE_POINTS)

# Published per-phoneme counts after null filtering: (boys, girls, men, women).
HGCW_CLASS_COUNTS = {
    "ae": (25, 17, 45, 47),
    "ah": (24, 19, 45, 47),
    "aw": (24, 18, 45, 46),
    "eh": (27, 19, 45, 48),
    "er": (26, 18, 37, 37),
    "ei": (25, 17, 43, 41),
    "ih": (27, 19, 45, 48),
    "iy": (20, 18, 43, 43),
    "oa": (25, 19, 45, 47),
    "oo": (27, 19, 45, 48),
    "uh": (26, 19, 45, 48),
    "uw": (25, 19, 44, 48),
}


class SpeakerGroup(Enum):
    MAN = "m"
    WOMAN = "w"
    BOY = "b"
    GIRL = "g"

    @property
    def speaker_class(self) -> str:
        return {"m": "men", "w": "women"}.get(self.value, "children")

    @property
    def speaker_class_id(self) -> int:
        return SPEAKER_CLASS_IDS[self.speaker_class]


def parse_filename(name: str) -> tuple[SpeakerGroup, int, str]:
    """Decode ``<group><2-digit speaker><2-char ARPABet>`` (e.g. ``m10ae``).

    Anything after the fifth character (an extension, say) is ignored.
    """
    stem = Path(name).name
    if len(stem) < 5:
        raise DataError(f"filename too short: {name!r}")
    try:
        group = SpeakerGroup(stem[0])
    except ValueError:
        raise UnknownGroupChar(f"unknown speaker group character {stem[0]!r} in {name!r}") from None
    digits = stem[1:3]
    if not (digits.isascii() and digits.isdigit()):
        raise NonNumericSpeakerId(f"speaker id {digits!r} in {name!r} is not numeric")
    code = stem[3:5]
    if code not in PHONEME_IDS:
        raise UnknownArpabetCode(f"unknown ARPABet code {code!r} in {name!r}")
    return group, int(digits), code


@dataclass(frozen=True)
class FeatureRecord:
    name: str
    group: SpeakerGroup
    speaker_id: int
    phoneme: str
    f0: float
    formants: tuple[float, ...]

    @classmethod
    def from_values(cls, name: str, f0: float, formants: Sequence[float]) -> "FeatureRecord":
        group, speaker_id, phoneme = parse_filename(name)
        if len(formants) != 12:
            raise DataError(f"{name}: expected 12 formant values, got {len(formants)}")
        return cls(name, group, speaker_id, phoneme, float(f0), tuple(float(v) for v in formants))

    def formant(self, index: int, point: str) -> float:
        """Formant ``index`` (1-3) at sample point ``point`` ('10', '50', 'SS', '80')."""
        return self.formants[(index - 1) * 4 + SAMPLE_POINTS.index(point)]

    @property
    def phoneme_id(self) -> int:
        return PHONEME_IDS[self.phoneme]

    @property
    def speaker_class_id(self) -> int:
        return self.group.speaker_class_id

    @property
    def is_complete(self) -> bool:
        return self.f0 > 0 and all(v > 0 for v in self.formants)

    def sort_key(self):
        return (self.name, self.f0, self.formants)


# --------------------------------------------------------------------------
# column maps and ingestion


@dataclass
class ColumnMap:
    """Where the filename, F0 and the 12 formant values live in a table.

    Column specs are header names (str) or 0-based positions (int).  When any
    spec is a name the first non-skipped line is read as a header.
    ``skip_rows=None`` skips leading lines until the first one whose first
    cell decodes as a filename (handles free-text preambles).
    """

    filename: str | int
    f0: str | int
    formants: dict[str, str | int]
    delimiter: str | None = None
    skip_rows: int | None = None

    def __post_init__(self):
        missing = [k for k in FORMANT_KEYS if k not in self.formants]
        if missing:
            raise MissingColumn(missing[0])

    @property
    def uses_header(self) -> bool:
        specs = [self.filename, self.f0, *self.formants.values()]
        return any(isinstance(s, str) for s in specs)

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnMap":
        return cls(
            filename=d["filename"],
            f0=d["f0"],
            formants=dict(d["formants"]),
            delimiter=d.get("delimiter"),
            skip_rows=d.get("skip_rows"),
        )

    @classmethod
    def from_json(cls, path) -> "ColumnMap":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "filename": self.filename,
            "f0": self.f0,
            "formants": dict(self.formants),
            "delimiter": self.delimiter,
            "skip_rows": self.skip_rows,
        }


def _hgcw_positions():
    # bigdata.dat: name, duration, F0, F1-F3 at steady state, then F1-F3 at 10%, 20%, ..., 80%
    ss = {1: 3, 2: 4, 3: 5}
    at = lambda pct, i: 6 + (pct // 10 - 1) * 3 + (i - 1)  # noqa: E731
    cols = {}
    for i in (1, 2, 3):
        cols[f"F{i}@10"] = at(10, i)
        cols[f"F{i}@50"] = at(50, i)
        cols[f"F{i}@SS"] = ss[i]
        cols[f"F{i}@80"] = at(80, i)
    return cols


HGCW_COLUMNS = ColumnMap(filename=0, f0=2, formants=_hgcw_positions())

CANONICAL_HEADER = ("filename", "f0", *FORMANT_KEYS)
CANONICAL_COLUMNS = ColumnMap(
    filename="filename", f0="f0", formants={k: k for k in FORMANT_KEYS}, delimiter=",", skip_rows=0
)


def _split_line(line: str, delimiter: str | None) -> list[str]:
    if delimiter is None:
        return line.split()
    return [cell.strip() for cell in next(csv.reader([line], delimiter=delimiter))]


def _looks_like_record(cells: list[str]) -> bool:
    if not cells:
        return False
    try:
        parse_filename(cells[0])
    except DataError:
        return False
    return True


def ingest(path, column_map: ColumnMap = HGCW_COLUMNS) -> list[FeatureRecord]:
    """Read a delimited formant table into records (nulls are kept; see
    :func:`filter_nulls`).

    Raises :class:`MissingColumn` when a mapped column is absent and
    :class:`MalformedRow` (with the 0-based data-row index) for unparsable rows.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]

    start = 0
    if column_map.skip_rows is not None:
        start = column_map.skip_rows
    elif not column_map.uses_header:
        while start < len(lines):
            if lines[start].strip():
                delim = column_map.delimiter or ("," if "," in lines[start] else None)
                if _looks_like_record(_split_line(lines[start], delim)):
                    break
            start += 1
    while start < len(lines) and not lines[start].strip():
        start += 1
    if start >= len(lines):
        return []

    delimiter = column_map.delimiter
    if delimiter is None and "," in lines[start]:
        delimiter = ","

    specs = {"filename": column_map.filename, "f0": column_map.f0, **column_map.formants}
    if column_map.uses_header:
        header = _split_line(lines[start], delimiter)
        start += 1
        positions = {}
        for key, spec in specs.items():
            if isinstance(spec, int):
                positions[key] = spec
            elif spec in header:
                positions[key] = header.index(spec)
            else:
                raise MissingColumn(spec)
    else:
        positions = dict(specs)

    width_needed = max(positions.values()) + 1
    records = []
    row_index = 0
    for line in lines[start:]:
        if not line.strip():
            continue
        cells = _split_line(line, delimiter)
        if row_index == 0 and len(cells) < width_needed:
            short = [k for k, p in positions.items() if p >= len(cells)]
            raise MissingColumn(specs[short[0]])
        if len(cells) < width_needed:
            raise MalformedRow(row_index, f"{len(cells)} cells, {width_needed} needed")
        try:
            f0 = float(cells[positions["f0"]])
            formants = [float(cells[positions[k]]) for k in FORMANT_KEYS]
            record = FeatureRecord.from_values(cells[positions["filename"]], f0, formants)
        except (ValueError, DataError) as exc:
            raise MalformedRow(row_index, str(exc)) from exc
        if not all(math.isfinite(v) for v in (f0, *formants)):
            raise MalformedRow(row_index, "non-finite value")
        records.append(record)
        row_index += 1
    return records


def write_records(records: Iterable[FeatureRecord], path) -> None:
    """Write records as a comma-separated table readable with CANONICAL_COLUMNS."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CANONICAL_HEADER)
        for r in records:
            writer.writerow([r.name, repr(r.f0), *(repr(v) for v in r.formants)])


def filter_nulls(records: Iterable[FeatureRecord]):
    """Split records into (kept, dropped); kept ones have F0 and all 12 formants > 0."""
    kept, dropped = [], []
    for r in records:
        (kept if r.is_complete else dropped).append(r)
    return kept, dropped


# --------------------------------------------------------------------------
# statistics


@dataclass
class ClassStats:
    """Per-phoneme counts as ``(total, boys, girls, men, women)``."""

    rows: dict[str, tuple[int, int, int, int, int]] = field(default_factory=dict)

    COLUMNS = ("samples", "boys", "girls", "men", "women")

    def totals(self) -> tuple[int, int, int, int, int]:
        sums = [0] * 5
        for row in self.rows.values():
            for i, v in enumerate(row):
                sums[i] += v
        return tuple(sums)

    def __getitem__(self, phoneme: str):
        return self.rows[phoneme]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["phoneme", *self.COLUMNS, "label_id"])
            for code, row in self.rows.items():
                writer.writerow([code, *row, PHONEME_IDS[code]])
            writer.writerow(["TOTAL", *self.totals(), len(self.rows)])

    def delta(self, reference: dict[str, tuple[int, ...]]) -> dict[str, tuple[int, ...]]:
        """Cell-wise differences (self - reference) for rows that disagree."""
        out = {}
        for code in PHONEMES:
            mine = self.rows.get(code, (0, 0, 0, 0, 0))
            ref = reference.get(code, (0, 0, 0, 0, 0))
            diff = tuple(a - b for a, b in zip(mine, ref))
            if any(diff):
                out[code] = diff
        return out


def class_stats(records: Iterable[FeatureRecord]) -> ClassStats:
    order = {SpeakerGroup.BOY: 1, SpeakerGroup.GIRL: 2, SpeakerGroup.MAN: 3, SpeakerGroup.WOMAN: 4}
    counts = {}
    for r in records:
        row = counts.setdefault(r.phoneme, [0, 0, 0, 0, 0])
        row[0] += 1
        row[order[r.group]] += 1
    return ClassStats({code: tuple(counts[code]) for code in PHONEMES if code in counts})


def reference_stats() -> dict[str, tuple[int, ...]]:
    """The published per-phoneme counts in ClassStats row layout."""
    return {code: (sum(c), *c) for code, c in HGCW_CLASS_COUNTS.items()}


# --------------------------------------------------------------------------
# splits


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.70
    dev_frac: float = 0.15
    test_frac: float = 0.15
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.dev_frac, self.test_frac)
        if any(f <= 0 for f in fracs):
            raise ValueError(f"split fractions must be positive: {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1: {fracs}")

    def sizes(self, n: int) -> tuple[int, int, int]:
        n_dev = round_half_up(n * self.dev_frac)
        n_test = round_half_up(n * self.test_frac)
        return n - n_dev - n_test, n_dev, n_test


def split_indices(n: int, spec: SplitSpec, seed=None):
    """Permute ``range(n)`` and cut it into (train, dev, test) index arrays.

    The rounding residue stays with train.
    """
    if n == 0:
        raise EmptyInput("cannot split an empty set")
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    perm = rng.permutation(n)
    n_train, n_dev, _ = spec.sizes(n)
    return perm[:n_train], perm[n_train:n_train + n_dev], perm[n_train + n_dev:]


def split(records: Sequence[FeatureRecord], spec: SplitSpec):
    """Deterministic train/dev/test split; independent of input order."""
    ordered = sorted(records, key=FeatureRecord.sort_key)
    tr, dv, te = split_indices(len(ordered), spec)
    return [ordered[i] for i in tr], [ordered[i] for i in dv], [ordered[i] for i in te]


def kfold_indices(n: int, k: int, seed):
    """k (train, validation) index pairs; validation folds partition range(n)."""
    if k < 2:
        raise DataError(f"k must be >= 2, got {k}")
    if k > n:
        raise KTooLarge(f"k={k} exceeds {n} items")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i, val in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((train, val))
    return out


def kfold(records: Sequence[FeatureRecord], k: int, seed):
    ordered = sorted(records, key=FeatureRecord.sort_key)
    return [
        ([ordered[i] for i in tr], [ordered[i] for i in va])
        for tr, va in kfold_indices(len(ordered), k, seed)
    ]

