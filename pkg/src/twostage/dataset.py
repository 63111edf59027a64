"""Dataset container, CSV I/O, seeding and stratified folds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


class DataError(ValueError):
    """Raised for malformed or out-of-contract data."""


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

def fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def mix64(z: int) -> int:
    """SplitMix64 finalizer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *context: object) -> int:
    """Seed of the substream named by ``context`` under ``master``.

    The context labels are joined with ``"/"`` into one string, so
    ``derive_seed(s, "fold", 3)`` hashes ``"fold/3"``. The result is
    ``mix64(master ^ fnv1a64(context_string))``.
    """
    label = "/".join(str(c) for c in context)
    return mix64((master & _MASK64) ^ fnv1a64(label))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & _MASK64))


# ---------------------------------------------------------------------------
# dataset
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Dataset:
    """N x D feature matrix with integer labels in ``[0, num_classes)``."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if x.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {x.shape}")
        if y.ndim != 1 or len(y) != len(x):
            raise DataError(f"{len(x)} feature rows but {len(y)} labels")
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise DataError("labels must be integers")
        y = y.astype(np.int64)
        if self.num_classes < 1:
            raise DataError("num_classes must be positive")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain NaN or infinite values")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


def class_counts(ds: Dataset) -> np.ndarray:
    return np.bincount(ds.labels, minlength=ds.num_classes)


def take_subset(ds: Dataset, indices: Sequence[int]) -> Dataset:
    """Rows of ``ds`` in the order given; duplicates allowed."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= len(ds)):
        raise IndexError(f"row index out of range for dataset of {len(ds)} rows")
    return Dataset(ds.features[idx], ds.labels[idx], ds.num_classes)


def load_csv(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such dataset file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "label":
            raise DataError(f"{path}:1: header must start with 'label'")
        dim = len(header) - 1
        expected = ["label"] + [f"f{j}" for j in range(dim)]
        if header != expected:
            raise DataError(f"{path}:1: header must be label,f0,...,f{dim - 1}")
        labels: list[int] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise DataError(f"{path}:{lineno}: expected {dim + 1} fields, got {len(row)}")
            try:
                label = int(row[0])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer label {row[0]!r}") from None
            if label < 0:
                raise DataError(f"{path}:{lineno}: negative label {label}")
            try:
                values = [float(v) for v in row[1:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}:{lineno}: non-finite feature value")
            labels.append(label)
            rows.append(values)
    if not labels:
        raise DataError(f"{path}: empty dataset")
    features = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return Dataset(features, np.array(labels, dtype=np.int64), max(labels) + 1)


def save_csv(ds: Dataset, path: str | Path) -> None:
    if len(ds) == 0:
        raise DataError("empty dataset cannot be written")
    header = ",".join(["label"] + [f"f{j}" for j in range(ds.dim)])
    lines = [header]
    for label, row in zip(ds.labels, ds.features):
        # repr() gives the shortest string that round-trips exactly
        lines.append(",".join([str(int(label))] + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# folds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    num_folds: int

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Row indices (train, test) for holding out ``fold``."""
        test = np.flatnonzero(self.fold_of == fold)
        train = np.flatnonzero(self.fold_of != fold)
        return train, test


def stratified_kfold(ds: Dataset, k: int, rng: np.random.Generator) -> FoldAssignment:
    """Shuffle each class with ``rng`` and deal its rows round-robin to ``k`` folds."""
    if k < 2:
        raise ValueError("k must be at least 2")
    counts = class_counts(ds)
    present = counts[counts > 0]
    if present.size and present.min() < k:
        c = int(np.flatnonzero((counts > 0) & (counts < k))[0])
        raise DataError(f"class {c} has {counts[c]} samples, fewer than k={k}")
    fold_of = np.empty(len(ds), dtype=np.int64)
    for c in range(ds.num_classes):
        rows = np.flatnonzero(ds.labels == c)
        if rows.size == 0:
            continue
        rows = rng.permutation(rows)
        fold_of[rows] = np.arange(rows.size) % k
    return FoldAssignment(fold_of, k)
