"""Baseline, input-space, feature-space and two-stage training strategies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .dataset import Dataset, derive_seed, make_rng
from .model import ALL_PARAMS, HEAD_ONLY, NetConfig, Network, TrainConfig, extract_features, init, predict, train, with_scope
from .resampling import ResamplerKind, resample

BASELINE = "baseline"
INPUT_SPACE = "is"
FEATURE_SPACE = "fs"
TWO_STAGE = "ts"

_NONE = ResamplerKind("none")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StrategySpec:
    kind: str = BASELINE
    first: ResamplerKind = field(default_factory=lambda: _NONE)
    second: ResamplerKind = field(default_factory=lambda: _NONE)

    def __post_init__(self):
        if self.kind == BASELINE:
            if self.first.kind != "none" or self.second.kind != "none":
                raise ConfigError("the baseline strategy takes no resamplers")
        elif self.kind == INPUT_SPACE:
            if self.second.kind != "none":
                raise ConfigError("input-space strategies have no second-stage resampler")
        elif self.kind == FEATURE_SPACE:
            if self.first.kind != "none":
                raise ConfigError("feature-space strategies have no first-stage resampler")
        elif self.kind == TWO_STAGE:
            if self.first.kind == "none" and self.second.kind == "none":
                raise ConfigError("two-stage strategy needs at least one resampler")
        else:
            raise ConfigError(f"unknown strategy kind {self.kind!r}")

    @classmethod
    def parse(cls, name: str, k: int = 5) -> "StrategySpec":
        """Parse ``baseline``, ``is:<r>``, ``fs:<r>`` or ``ts:<r1>+<r2>``."""
        name = name.strip().lower()
        if name == BASELINE:
            return cls()
        kind, sep, rest = name.partition(":")
        if not sep or not rest:
            raise ConfigError(f"cannot parse strategy {name!r}")
        try:
            if kind == INPUT_SPACE:
                return cls(kind, first=ResamplerKind.parse(rest, k))
            if kind == FEATURE_SPACE:
                return cls(kind, second=ResamplerKind.parse(rest, k))
            if kind == TWO_STAGE:
                a, plus, b = rest.partition("+")
                if not plus:
                    raise ConfigError(f"two-stage strategy needs '<first>+<second>': {name!r}")
                return cls(kind, ResamplerKind.parse(a, k), ResamplerKind.parse(b, k))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        raise ConfigError(f"unknown strategy kind in {name!r}")

    @property
    def name(self) -> str:
        if self.kind == BASELINE:
            return BASELINE
        if self.kind == INPUT_SPACE:
            return f"is:{self.first}"
        if self.kind == FEATURE_SPACE:
            return f"fs:{self.second}"
        return f"ts:{self.first}+{self.second}"

    def __str__(self) -> str:
        return self.name


PAPER_STRATEGIES = (
    "baseline",
    "is:rus",
    "is:ros",
    "is:smote",
    "fs:rus",
    "fs:ros",
    "fs:smote",
    "ts:smote+smote",
    "ts:smote+rus",
)


@dataclass
class StrategyTrace:
    """Sizes and snapshots recorded while a strategy runs (for inspection and tests)."""

    stage1_rows: int = 0
    stage2_source_rows: int = 0
    stage2_rows: int = 0
    body_after_stage1: list = field(default_factory=list)


def run_strategy(
    train_ds: Dataset,
    spec: StrategySpec,
    net_cfg: NetConfig,
    stage1_cfg: TrainConfig = TrainConfig(),
    stage2_cfg: TrainConfig | None = None,
    seed: int = 0,
    trace: StrategyTrace | None = None,
) -> Network:
    """Train a network on ``train_ds`` following ``spec``.

    Randomness comes from disjoint substreams of ``seed``: ``init``,
    ``s1.resample``, ``s1.train``, ``s2.resample`` and ``s2.train``. The
    ``seed`` fields of the two train configs are ignored. Stage 2 starts
    with fresh RMSprop accumulators.
    """
    if stage2_cfg is None:
        stage2_cfg = stage1_cfg
    trace = trace if trace is not None else StrategyTrace()
    net = init(net_cfg, make_rng(derive_seed(seed, "init")))

    stage1_ds = train_ds
    if spec.kind in (INPUT_SPACE, TWO_STAGE) and spec.first.kind != "none":
        stage1_ds = resample(train_ds, spec.first, make_rng(derive_seed(seed, "s1.resample")))
    trace.stage1_rows = len(stage1_ds)
    net = train(net, stage1_ds, with_scope(stage1_cfg, ALL_PARAMS, derive_seed(seed, "s1.train")))
    trace.body_after_stage1 = [p.copy() for p in net.body_params]
    if spec.kind in (BASELINE, INPUT_SPACE):
        return net

    # features always come from the original training rows, never synthetic ones
    feats = Dataset(extract_features(net, train_ds.features), train_ds.labels, train_ds.num_classes)
    trace.stage2_source_rows = len(feats)
    feats = resample(feats, spec.second, make_rng(derive_seed(seed, "s2.resample")))
    trace.stage2_rows = len(feats)
    return train(net, feats, with_scope(stage2_cfg, HEAD_ONLY, derive_seed(seed, "s2.train")), on_features=True)


@dataclass(frozen=True)
class Evaluation:
    confusion: np.ndarray
    avacc: float
    cba: float
    mavg: float
    acc: float

    def as_dict(self) -> dict[str, float]:
        return {"acc": self.acc, "avacc": self.avacc, "cba": self.cba, "mavg": self.mavg}


def evaluate(net: Network, test_ds: Dataset) -> Evaluation:
    if len(test_ds) == 0:
        raise ValueError("empty test set")
    cm = metrics.confusion(test_ds.labels, predict(net, test_ds.features), test_ds.num_classes)
    return Evaluation(cm, metrics.avacc(cm), metrics.cba(cm), metrics.mavg(cm), metrics.accuracy(cm))
