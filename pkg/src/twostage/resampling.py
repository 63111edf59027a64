"""Random undersampling, random oversampling and SMOTE.

Every resampler rebalances to a uniform class distribution. The
``*_with_provenance`` variants also report where each output row came
from, which is what the tests use to check synthetic rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, DataError, class_counts

log = logging.getLogger(__name__)

RESAMPLER_NAMES = ("none", "rus", "ros", "smote")


@dataclass(frozen=True)
class ResamplerKind:
    kind: str = "none"
    k: int | None = None

    def __post_init__(self):
        if self.kind not in RESAMPLER_NAMES:
            raise ValueError(f"unknown resampler {self.kind!r}; choose from {RESAMPLER_NAMES}")
        if self.kind == "smote":
            if self.k is None:
                object.__setattr__(self, "k", 5)
            elif self.k < 1:
                raise ValueError("SMOTE needs k >= 1")
        elif self.k is not None:
            raise ValueError(f"k is only meaningful for smote, not {self.kind}")

    @classmethod
    def parse(cls, name: str, k: int = 5) -> "ResamplerKind":
        name = name.strip().lower()
        return cls(name, k if name == "smote" else None)

    def __str__(self) -> str:
        return self.kind


@dataclass(frozen=True)
class Provenance:
    """Origin of every output row.

    ``source[j]`` is the input row copied (or used as the SMOTE base) for
    output row j. ``neighbor[j]`` is the SMOTE neighbour or -1, and
    ``lam[j]`` the interpolation weight (0 for copies).
    """

    source: np.ndarray
    neighbor: np.ndarray
    lam: np.ndarray


def knn_indices(points: np.ndarray, query_index: int, k: int, candidate_indices: Sequence[int]) -> np.ndarray:
    """The ``k`` candidates nearest to ``points[query_index]``, self excluded.

    Euclidean distance; ties go to the lower row index.
    """
    cand = np.asarray(candidate_indices, dtype=np.int64)
    if query_index not in set(cand.tolist()):
        raise ValueError("query_index must be one of the candidates")
    if cand.size < k + 1:
        raise ValueError(f"need at least k+1={k + 1} candidates, got {cand.size}")
    cand = cand[cand != query_index]
    diff = points[cand] - points[query_index]
    dist = np.einsum("ij,ij->i", diff, diff)
    order = np.lexsort((cand, dist))
    return cand[order[:k]]


def _class_rows(ds: Dataset) -> list[np.ndarray]:
    counts = class_counts(ds)
    if counts.min() < 1:
        empty = np.flatnonzero(counts == 0).tolist()
        raise DataError(f"cannot resample: classes {empty} have no samples")
    return [np.flatnonzero(ds.labels == c) for c in range(ds.num_classes)]


def _assemble(ds: Dataset, source, neighbor, lam) -> tuple[Dataset, Provenance]:
    source = np.asarray(source, dtype=np.int64)
    neighbor = np.asarray(neighbor, dtype=np.int64)
    lam = np.asarray(lam, dtype=np.float64)
    x = ds.features[source].copy()
    synth = neighbor >= 0
    if synth.any():
        base = x[synth]
        x[synth] = base + lam[synth, None] * (ds.features[neighbor[synth]] - base)
    out = Dataset(x, ds.labels[source], ds.num_classes)
    return out, Provenance(source, neighbor, lam)


def rus_with_provenance(ds: Dataset, rng: np.random.Generator):
    rows = _class_rows(ds)
    target = min(r.size for r in rows)
    kept = [np.sort(rng.choice(r, size=target, replace=False)) for r in rows]
    source = np.sort(np.concatenate(kept))
    return _assemble(ds, source, np.full(source.size, -1), np.zeros(source.size))


def ros_with_provenance(ds: Dataset, rng: np.random.Generator):
    rows = _class_rows(ds)
    target = max(r.size for r in rows)
    extra = [rng.choice(r, size=target - r.size, replace=True) for r in rows]
    source = np.concatenate([np.arange(len(ds))] + extra)
    return _assemble(ds, source, np.full(source.size, -1), np.zeros(source.size))


def smote_with_provenance(ds: Dataset, k: int, rng: np.random.Generator):
    if k < 1:
        raise ValueError("k must be >= 1")
    rows = _class_rows(ds)
    target = max(r.size for r in rows)
    source = [np.arange(len(ds))]
    neighbor = [np.full(len(ds), -1)]
    lam = [np.zeros(len(ds))]
    for c, members in enumerate(rows):
        need = target - members.size
        if need == 0:
            continue
        if members.size == 1:
            log.debug("class %d has a single sample; synthetic rows are copies", c)
            source.append(np.full(need, members[0]))
            neighbor.append(np.full(need, -1))
            lam.append(np.zeros(need))
            continue
        kk = min(k, members.size - 1)
        cache: dict[int, np.ndarray] = {}
        base = np.empty(need, dtype=np.int64)
        nn = np.empty(need, dtype=np.int64)
        lams = np.empty(need)
        for j in range(need):
            b = int(members[rng.integers(members.size)])
            if b not in cache:
                cache[b] = knn_indices(ds.features, b, kk, members)
            base[j] = b
            nn[j] = cache[b][rng.integers(kk)]
            lams[j] = rng.random()
        source.append(base)
        neighbor.append(nn)
        lam.append(lams)
    return _assemble(ds, np.concatenate(source), np.concatenate(neighbor), np.concatenate(lam))


def rus(ds: Dataset, rng: np.random.Generator) -> Dataset:
    return rus_with_provenance(ds, rng)[0]


def ros(ds: Dataset, rng: np.random.Generator) -> Dataset:
    return ros_with_provenance(ds, rng)[0]


def smote(ds: Dataset, k: int, rng: np.random.Generator) -> Dataset:
    return smote_with_provenance(ds, k, rng)[0]


def resample_with_provenance(ds: Dataset, method: ResamplerKind, rng: np.random.Generator):
    if method.kind == "none":
        n = len(ds)
        return _assemble(ds, np.arange(n), np.full(n, -1), np.zeros(n))
    if method.kind == "rus":
        return rus_with_provenance(ds, rng)
    if method.kind == "ros":
        return ros_with_provenance(ds, rng)
    return smote_with_provenance(ds, method.k, rng)


def resample(ds: Dataset, method: ResamplerKind, rng: np.random.Generator) -> Dataset:
    return resample_with_provenance(ds, method, rng)[0]
