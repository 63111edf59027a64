"""Artificial imbalance induction with nested subsets across levels.

Classes are addressed by *position* along a class ordering: position 1 is
``class_order[0]``. Ratios and counts are computed in exact rational
arithmetic so that floor rounding never slips on values like 625 / 5.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dataset import Dataset, DataError, class_counts, take_subset


class Scenario(enum.Enum):
    LINEAR = "linear"
    SINGLE_MAJORITY = "single_majority"
    SINGLE_MINORITY = "single_minority"
    HALF_MINORITY = "half_minority"


class RatioMode(enum.Enum):
    RATIO_LINEAR = "ratio_linear"
    COUNT_LINEAR = "count_linear"


ALL_SCENARIOS = tuple(Scenario)


@dataclass(frozen=True)
class ImbalancePlan:
    scenario: Scenario
    class_order: tuple[int, ...]
    levels: tuple[float, ...]
    n_per_class: int
    ratio_mode: RatioMode = RatioMode.RATIO_LINEAR

    def __post_init__(self):
        order = tuple(int(c) for c in self.class_order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"class_order is not a permutation: {order}")
        levels = tuple(float(v) for v in self.levels)
        if not levels:
            raise ValueError("at least one imbalance level is required")
        if levels[0] < 1:
            raise ValueError("imbalance ratios must be >= 1")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"levels must be strictly ascending: {levels}")
        object.__setattr__(self, "class_order", order)
        object.__setattr__(self, "levels", levels)

    @property
    def num_classes(self) -> int:
        return len(self.class_order)


def minority_mask(scenario: Scenario, class_order: Sequence[int], num_classes: int) -> np.ndarray:
    """Minority flags by position along ``class_order``.

    The linear scenario has no minority set; its mask is all False.
    """
    if len(class_order) != num_classes:
        raise ValueError("class_order length must equal num_classes")
    mask = np.zeros(num_classes, dtype=bool)
    if scenario is Scenario.SINGLE_MAJORITY:
        mask[1:] = True
    elif scenario is Scenario.SINGLE_MINORITY:
        mask[0] = True
    elif scenario is Scenario.HALF_MINORITY:
        mask[: num_classes // 2] = True
    return mask


def _exact_ratios(scenario, ir, num_classes, class_order, ratio_mode) -> list[Fraction]:
    if ir < 1:
        raise ValueError(f"imbalance ratio must be >= 1, got {ir}")
    if num_classes < 2:
        raise ValueError("at least two classes are required")
    ir_q = Fraction(ir)
    if scenario is Scenario.LINEAR:
        steps = [Fraction(i, num_classes - 1) for i in range(num_classes)]
        if ratio_mode is RatioMode.COUNT_LINEAR:
            # counts fall linearly from n to n / IR; the ratio is their reciprocal
            return [1 / (1 - (1 - 1 / ir_q) * t) for t in steps]
        return [1 + (ir_q - 1) * t for t in steps]
    mask = minority_mask(scenario, class_order, num_classes)
    return [ir_q if m else Fraction(1) for m in mask]


def class_ratios(
    scenario: Scenario,
    ir: float,
    num_classes: int,
    class_order: Sequence[int] | None = None,
    ratio_mode: RatioMode = RatioMode.RATIO_LINEAR,
) -> np.ndarray:
    """Per-position ratio ``r_i`` (the majority count divided by class i's count)."""
    if class_order is None:
        class_order = range(num_classes)
    ratios = _exact_ratios(scenario, ir, num_classes, list(class_order), ratio_mode)
    return np.array([float(r) for r in ratios])


def _floor_div(n: int, ratio) -> int:
    if isinstance(ratio, Fraction):
        return math.floor(n / ratio)
    # floats may be a hair off an exact quotient; recover the intended rational
    return math.floor(Fraction(n) / Fraction(ratio).limit_denominator(10**9))


def target_counts(ratios: Sequence, n: int | Sequence[int]) -> np.ndarray:
    """``floor(n / r_i)`` per position. ``n`` may be a scalar or per position."""
    ns = [int(n)] * len(ratios) if np.ndim(n) == 0 else [int(v) for v in n]
    if len(ns) != len(ratios):
        raise ValueError("n must be a scalar or match the number of ratios")
    out = []
    for r, n_i in zip(ratios, ns):
        if r < 1:
            raise ValueError(f"ratios must be >= 1, got {float(r)}")
        count = _floor_div(n_i, r)
        if count < 1:
            raise ValueError(f"target count for n={n_i}, ratio={float(r):g} would be 0")
        out.append(count)
    return np.array(out, dtype=np.int64)


def plan_counts(plan: ImbalancePlan, level: float, n: int | Sequence[int] | None = None) -> np.ndarray:
    """Target counts by position for one level of ``plan``."""
    ratios = _exact_ratios(plan.scenario, level, plan.num_classes, plan.class_order, plan.ratio_mode)
    return target_counts(ratios, plan.n_per_class if n is None else n)


def total_observations(plan: ImbalancePlan, level: float) -> int:
    return int(plan_counts(plan, level).sum())


def induce_indices(ds: Dataset, plan: ImbalancePlan, rng: np.random.Generator) -> list[np.ndarray]:
    """Row indices of ``ds`` kept at each level of ``plan``.

    Each class is shuffled once; level l keeps the first ``n_i(l)`` rows of
    that shuffle, so higher levels are subsets of lower ones.
    """
    if plan.num_classes != ds.num_classes:
        raise DataError(f"plan has {plan.num_classes} classes, dataset has {ds.num_classes}")
    counts = class_counts(ds)
    if counts.min() < 1 or counts.max() - counts.min() > 1:
        raise DataError(f"imbalance must be induced on balanced data, got counts {counts.tolist()}")
    order = plan.class_order
    n_by_position = [int(counts[c]) for c in order]
    shuffled = [rng.permutation(np.flatnonzero(ds.labels == c)) for c in order]
    out = []
    for level in plan.levels:
        targets = plan_counts(plan, level, n_by_position)
        keep = np.concatenate([rows[:t] for rows, t in zip(shuffled, targets)])
        out.append(np.sort(keep))
    return out


def induce(ds: Dataset, plan: ImbalancePlan, rng: np.random.Generator) -> list[Dataset]:
    return [take_subset(ds, idx) for idx in induce_indices(ds, plan, rng)]
