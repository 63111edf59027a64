"""Confusion matrices, multi-class imbalance metrics and average ranks."""

from __future__ import annotations

import numpy as np


class MetricError(ValueError):
    pass


def confusion(y_true, y_pred, num_classes: int) -> np.ndarray:
    """Counts with true class by row and predicted class by column."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise MetricError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise MetricError("no samples to evaluate")
    for name, y in (("y_true", y_true), ("y_pred", y_pred)):
        if y.min() < 0 or y.max() >= num_classes:
            raise MetricError(f"{name} has labels outside [0, {num_classes})")
    flat = np.bincount(y_true * num_classes + y_pred, minlength=num_classes * num_classes)
    return flat.reshape(num_classes, num_classes)


def _recalls(cm: np.ndarray) -> np.ndarray:
    cm = np.asarray(cm)
    rows = cm.sum(axis=1)
    if np.any(rows == 0):
        absent = np.flatnonzero(rows == 0).tolist()
        raise MetricError(f"recall undefined: classes {absent} absent from y_true")
    return np.diag(cm) / rows


def accuracy(cm: np.ndarray) -> float:
    cm = np.asarray(cm)
    total = cm.sum()
    if total == 0:
        raise MetricError("empty confusion matrix")
    return float(np.trace(cm) / total)


def avacc(cm: np.ndarray) -> float:
    """Mean per-class recall."""
    return float(np.mean(_recalls(cm)))


def cba(cm: np.ndarray) -> float:
    """Class balance accuracy: diagonal over max(row sum, column sum), averaged."""
    cm = np.asarray(cm)
    denom = np.maximum(cm.sum(axis=1), cm.sum(axis=0))
    if np.any(denom == 0):
        raise MetricError(f"classes {np.flatnonzero(denom == 0).tolist()} never occur")
    return float(np.mean(np.diag(cm) / denom))


def mavg(cm: np.ndarray) -> float:
    """Geometric mean of per-class recalls."""
    r = _recalls(cm)
    if np.any(r == 0):
        return 0.0
    # log-space keeps the product from underflowing for many classes
    return float(np.exp(np.mean(np.log(r))))


def average_ranks(scores, higher_is_better: bool = True) -> np.ndarray:
    """Mean rank of each method (column) over cells (rows); 1 is best, ties share."""
    s = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    if s.size == 0:
        raise ValueError("need at least one cell")
    if np.isnan(s).any():
        raise ValueError("scores contain NaN")
    if higher_is_better:
        s = -s
    ranks = np.empty_like(s)
    for i, row in enumerate(s):
        order = np.argsort(row, kind="stable")
        sorted_row = row[order]
        pos = 0
        while pos < len(order):
            end = pos
            while end + 1 < len(order) and sorted_row[end + 1] == sorted_row[pos]:
                end += 1
            ranks[i, order[pos : end + 1]] = (pos + end) / 2 + 1
            pos = end + 1
    return ranks.mean(axis=0)
