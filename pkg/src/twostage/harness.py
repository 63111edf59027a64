"""Experiment grid: folds x scenarios x imbalance levels x strategies.

Results are appended to a CSV (``scenario,ir,fold,strategy,metric,value``)
one cell at a time, so an interrupted run can be resumed: cells that are
already complete in the file are skipped.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dataset import Dataset, DataError, class_counts, derive_seed, load_csv, make_rng, stratified_kfold, take_subset
from .imbalance import ImbalancePlan, RatioMode, Scenario, induce_indices, plan_counts
from .metrics import average_ranks
from .model import NetConfig, TrainConfig
from .pipeline import PAPER_STRATEGIES, ConfigError, StrategySpec, evaluate, run_strategy

log = logging.getLogger(__name__)

METRICS = ("acc", "avacc", "cba", "mavg")
RESULT_HEADER = ("scenario", "ir", "fold", "strategy", "metric", "value")
CURVE_HEADER = ("scenario", "metric", "ir", "mean", "std")
ERROR_METRIC = "error"


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 8
    samples_per_class: int = 200
    dims: int = 16
    cluster_spread: float = 1.0
    class_separation: float = 3.0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError("synthetic data needs at least two classes")
        if min(self.samples_per_class, self.dims) < 1:
            raise ConfigError("samples_per_class and dims must be positive")
        if not (self.cluster_spread > 0 and self.class_separation > 0):
            raise ConfigError("cluster_spread and class_separation must be positive")


def generate_synthetic(spec: SyntheticSpec, rng: np.random.Generator, max_tries: int = 1000) -> Dataset:
    """Isotropic Gaussian blobs, one per class, with well-separated centres."""
    half = spec.class_separation * max(1.0, spec.num_classes ** (1.0 / spec.dims))
    centres: list[np.ndarray] = []
    for c in range(spec.num_classes):
        for _ in range(max_tries):
            cand = rng.uniform(-half, half, size=spec.dims)
            if all(np.linalg.norm(cand - other) >= spec.class_separation for other in centres):
                centres.append(cand)
                break
        else:
            raise DataError(
                f"could not place centre {c} after {max_tries} tries; "
                "try a smaller class_separation"
            )
    n = spec.samples_per_class
    x = np.concatenate([ctr + spec.cluster_spread * rng.standard_normal((n, spec.dims)) for ctr in centres])
    y = np.repeat(np.arange(spec.num_classes), n)
    return Dataset(x, y, spec.num_classes)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    dataset: str | SyntheticSpec = field(default_factory=SyntheticSpec)
    num_folds: int = 10
    fold_limit: int | None = None
    scenarios: tuple[Scenario, ...] = tuple(Scenario)
    ir_levels: tuple[float, ...] = (2.0, 5.0, 10.0)
    strategies: tuple[str, ...] = PAPER_STRATEGIES
    smote_k: int = 5
    body_dims: tuple[int, ...] = (64, 32)
    head_hidden: int = 32
    train: TrainConfig = field(default_factory=TrainConfig)
    finetune: TrainConfig | None = None
    master_seed: int = 0
    ratio_mode: RatioMode = RatioMode.RATIO_LINEAR
    output_dir: str = "results"
    workers: int = 1
    strict: bool = False

    def __post_init__(self):
        if isinstance(self.dataset, dict):
            self.dataset = SyntheticSpec(**self.dataset)
        self.scenarios = tuple(Scenario(s) if not isinstance(s, Scenario) else s for s in self.scenarios)
        self.ir_levels = tuple(float(v) for v in self.ir_levels)
        self.strategies = tuple(self.strategies)
        self.body_dims = tuple(int(d) for d in self.body_dims)
        if isinstance(self.ratio_mode, str):
            self.ratio_mode = RatioMode(self.ratio_mode)
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        if isinstance(self.finetune, dict):
            self.finetune = replace(self.train, **self.finetune)
        if self.num_folds < 2:
            raise ConfigError("num_folds must be at least 2")
        if self.fold_limit is not None and not 1 <= self.fold_limit <= self.num_folds:
            raise ConfigError("fold_limit must lie in [1, num_folds]")
        if not self.scenarios or not self.ir_levels or not self.strategies:
            raise ConfigError("scenarios, ir_levels and strategies must be non-empty")
        levels = sorted(self.ir_levels)
        if levels[0] < 1 or len(set(levels)) != len(levels):
            raise ConfigError("ir_levels must be distinct values >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for name in self.strategies:
            StrategySpec.parse(name, self.smote_k)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["scenarios"] = [s.value for s in self.scenarios]
        out["ratio_mode"] = self.ratio_mode.value
        return out

    @property
    def stage2(self) -> TrainConfig:
        return self.finetune if self.finetune is not None else self.train

    def load_dataset(self) -> Dataset:
        if isinstance(self.dataset, SyntheticSpec):
            return generate_synthetic(self.dataset, make_rng(derive_seed(self.master_seed, "data")))
        return load_csv(self.dataset)

    def specs(self) -> list[StrategySpec]:
        return [StrategySpec.parse(s, self.smote_k) for s in self.strategies]


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return repr(float(value))


@dataclass(frozen=True)
class _Cell:
    fold: int
    scenario: Scenario
    ir: float
    strategy: str

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.scenario.value, _fmt(self.ir), str(self.fold), self.strategy)


@dataclass
class GridOutcome:
    path: Path
    cells: int
    computed: int
    skipped: int
    errors: int


def _cell_rows(cell: _Cell, values: dict[str, float] | None) -> list[tuple]:
    scen, ir, fold, strat = cell.key
    if values is None:
        return [(scen, ir, fold, strat, ERROR_METRIC, "nan")]
    return [(scen, ir, fold, strat, m, _fmt(values[m])) for m in METRICS]


def _run_cell(args):
    cell, train_ds, test_ds, spec, net_cfg, train_cfg, stage2_cfg, seed = args
    try:
        net = run_strategy(train_ds, spec, net_cfg, train_cfg, stage2_cfg, seed)
        return cell, evaluate(net, test_ds).as_dict(), None
    except Exception as exc:  # recorded as an error row, the grid goes on
        return cell, None, f"{type(exc).__name__}: {exc}"


def _read_completed(path: Path) -> tuple[list[list[str]], set]:
    """Rows of complete cells in ``path`` (file order) and their keys."""
    if not path.exists():
        return [], set()
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[0] != ",".join(RESULT_HEADER):
        raise DataError(f"{path}: not a results file")
    # a trailing line without newline may be half-written
    body = lines[1:-1] if not text.endswith("\n") else lines[1:]
    rows = [r for r in csv.reader(io.StringIO("\n".join(body))) if r]
    by_cell: dict[tuple, list[list[str]]] = {}
    for r in rows:
        if len(r) == len(RESULT_HEADER):
            by_cell.setdefault(tuple(r[:4]), []).append(r)
    done = set()
    for key, cell_rows in by_cell.items():
        metric_names = {r[4] for r in cell_rows}
        if metric_names == set(METRICS) and len(cell_rows) == len(METRICS):
            done.add(key)
        elif metric_names == {ERROR_METRIC}:
            done.add(key)
    kept = [r for r in rows if len(r) == len(RESULT_HEADER) and tuple(r[:4]) in done]
    return kept, done


def _prepare_jobs(cfg: ExperimentConfig, ds: Dataset):
    """All grid cells in canonical order with their inputs."""
    folds = stratified_kfold(ds, cfg.num_folds, make_rng(derive_seed(cfg.master_seed, "folds")))
    net_cfg = NetConfig(ds.dim, cfg.body_dims, cfg.head_hidden, ds.num_classes)
    specs = cfg.specs()
    levels = tuple(sorted(cfg.ir_levels))
    n_folds = cfg.fold_limit or cfg.num_folds
    for fold in range(n_folds):
        train_idx, test_idx = folds.train_test(fold)
        train_all = take_subset(ds, train_idx)
        test_ds = take_subset(ds, test_idx)
        order = make_rng(derive_seed(cfg.master_seed, "fold", fold, "order")).permutation(ds.num_classes)
        for scenario in cfg.scenarios:
            plan = ImbalancePlan(scenario, tuple(order), levels, int(class_counts(train_all).max()), cfg.ratio_mode)
            # same induction stream for every scenario of a fold
            rng = make_rng(derive_seed(cfg.master_seed, "fold", fold, "induce"))
            subsets = induce_indices(train_all, plan, rng)
            for level, idx in zip(levels, subsets):
                train_ds = take_subset(train_all, idx)
                for spec in specs:
                    cell = _Cell(fold, scenario, level, spec.name)
                    seed = derive_seed(cfg.master_seed, "cell", fold, scenario.value, _fmt(level), spec.name)
                    yield cell, train_ds, test_ds, spec, net_cfg, cfg.train, cfg.stage2, seed


def run_grid(cfg: ExperimentConfig, results_name: str = "results.csv") -> GridOutcome:
    """Run (or resume) the grid, writing ``output_dir/results_name``."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / results_name
    ds = cfg.load_dataset()

    kept, done = _read_completed(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_HEADER)
        writer.writerows(kept)
        fh.flush()

        jobs = list(_prepare_jobs(cfg, ds))
        pending = [j for j in jobs if j[0].key not in done]
        errors = sum(1 for r in kept if r[4] == ERROR_METRIC)

        def record(cell, values, error):
            nonlocal errors
            if error is not None:
                log.error("cell %s failed: %s", cell.key, error)
                if cfg.strict:
                    raise RuntimeError(f"cell {cell.key} failed: {error}")
                errors += 1
            writer.writerows(_cell_rows(cell, values))
            fh.flush()

        if cfg.workers == 1:
            for job in pending:
                record(*_run_cell(job))
        else:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [pool.submit(_run_cell, job) for job in pending]
                for fut in as_completed(futures):
                    record(*fut.result())
    return GridOutcome(path, len(jobs), len(pending), len(jobs) - len(pending), errors)


# ---------------------------------------------------------------------------
# results I/O and summaries
# ---------------------------------------------------------------------------

def read_results(path: str | Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_HEADER:
            raise DataError(f"{path}: expected header {','.join(RESULT_HEADER)}")
        rows = []
        for r in reader:
            r["ir"] = float(r["ir"])
            r["fold"] = int(r["fold"])
            r["value"] = float(r["value"])
            rows.append(r)
    return rows


def baseline_ir_study(cfg: ExperimentConfig) -> Path:
    """Baseline-only grid over IR levels including 1.0; writes ``ir_curve.csv``."""
    levels = tuple(sorted(set(cfg.ir_levels) | {1.0}))
    study = replace(cfg, strategies=("baseline",), ir_levels=levels)
    outcome = run_grid(study, "ir_study_results.csv")
    rows = [r for r in read_results(outcome.path) if r["metric"] != ERROR_METRIC]
    grouped: dict[tuple, list[float]] = {}
    for r in rows:
        grouped.setdefault((r["scenario"], r["metric"], r["ir"]), []).append(r["value"])
    curve = Path(cfg.output_dir) / "ir_curve.csv"
    with curve.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for scenario in study.scenarios:
            for metric in METRICS:
                for ir in levels:
                    vals = grouped.get((scenario.value, metric, ir))
                    if not vals:
                        continue
                    writer.writerow([scenario.value, metric, _fmt(ir), _fmt(np.mean(vals)), _fmt(np.std(vals))])
    return curve


@dataclass
class Summary:
    strategies: list[str]
    metrics: list[str]
    # (scenario, ir, metric) -> per-strategy mean, in ``strategies`` order
    per_setting: dict[tuple[str, float, str], list[float]]
    # metric -> (per-strategy overall mean, per-strategy average rank)
    overall: dict[str, tuple[list[float], list[float]]]

    def best(self, key) -> list[str]:
        means = self.per_setting[key]
        top = max(means)
        return [s for s, m in zip(self.strategies, means) if m == top]


def summarize(results_path: str | Path, out_dir: str | Path | None = None) -> Summary:
    """Per-setting means (best marked) and overall means with average ranks.

    Ranks are computed per metric over every (scenario, ir, fold) cell.
    Writes ``table1.csv`` and ``table2.csv`` next to the results unless
    ``out_dir`` says otherwise.
    """
    rows = [r for r in read_results(results_path) if r["metric"] != ERROR_METRIC]
    if not rows:
        raise DataError(f"{results_path}: no results to summarize")
    strategies = list(dict.fromkeys(r["strategy"] for r in rows))
    metric_names = [m for m in METRICS if any(r["metric"] == m for r in rows)]
    cells = sorted({(r["scenario"], r["ir"], r["fold"]) for r in rows})
    values = {(r["scenario"], r["ir"], r["fold"], r["strategy"], r["metric"]): r["value"] for r in rows}

    missing = [
        (*cell, s, m)
        for cell in cells
        for s in strategies
        for m in metric_names
        if (*cell, s, m) not in values
    ]
    if missing:
        shown = ", ".join(str(m) for m in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise DataError(f"results are not a full factorial; missing {shown}{more}")

    settings = sorted({(c[0], c[1]) for c in cells})
    per_setting = {}
    for scen, ir in settings:
        folds = [c[2] for c in cells if c[0] == scen and c[1] == ir]
        for m in metric_names:
            per_setting[(scen, ir, m)] = [
                float(np.mean([values[(scen, ir, f, s, m)] for f in folds])) for s in strategies
            ]
    overall = {}
    for m in metric_names:
        table = np.array([[values[(*cell, s, m)] for s in strategies] for cell in cells])
        overall[m] = (table.mean(axis=0).tolist(), average_ranks(table).tolist())
    summary = Summary(strategies, metric_names, per_setting, overall)

    out = Path(out_dir) if out_dir is not None else Path(results_path).parent
    _write_summary(summary, out)
    return summary


def _write_summary(summary: Summary, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with (out / "table1.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "ir", "metric", *summary.strategies, "best"])
        for key, means in summary.per_setting.items():
            scen, ir, m = key
            w.writerow([scen, _fmt(ir), m, *[f"{v:.4f}" for v in means], "|".join(summary.best(key))])
    with (out / "table2.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy", "metric", "mean", "avg_rank"])
        for m in summary.metrics:
            means, ranks = summary.overall[m]
            for s, mean, rank in zip(summary.strategies, means, ranks):
                w.writerow([s, m, f"{mean:.4f}", f"{rank:.2f}"])


def format_summary(summary: Summary) -> str:
    """Plain-text rendering; the best strategy per row is starred."""
    lines = []
    width = max(12, *(len(s) for s in summary.strategies))
    head = f"{'scenario':<16}{'ir':>6} {'metric':<7}" + "".join(f"{s:>{width + 2}}" for s in summary.strategies)
    lines.append(head)
    for key, means in summary.per_setting.items():
        scen, ir, m = key
        best = set(summary.best(key))
        cols = "".join(
            f"{(f'*{v:.4f}' if s in best else f'{v:.4f}'):>{width + 2}}" for s, v in zip(summary.strategies, means)
        )
        lines.append(f"{scen:<16}{ir:>6.1f} {m:<7}{cols}")
    lines.append("")
    lines.append(f"{'strategy':<{width}}" + "".join(f"{m:>20}" for m in summary.metrics))
    for i, s in enumerate(summary.strategies):
        cols = "".join(
            f"{summary.overall[m][0][i]:>12.4f} ({summary.overall[m][1][i]:5.2f})" for m in summary.metrics
        )
        lines.append(f"{s:<{width}}{cols}")
    return "\n".join(lines)


def describe_imbalance(
    cfg: ExperimentConfig,
    n_per_class: int | None = None,
    num_classes: int | None = None,
    path: str | Path | None = None,
) -> list[dict]:
    """Target class counts (by position) and totals for every scenario and level."""
    if n_per_class is None or num_classes is None:
        if isinstance(cfg.dataset, SyntheticSpec):
            n_per_class = n_per_class or cfg.dataset.samples_per_class
            num_classes = num_classes or cfg.dataset.num_classes
        else:
            counts = class_counts(load_csv(cfg.dataset))
            n_per_class = n_per_class or int(counts.min())
            num_classes = num_classes or len(counts)
    levels = tuple(sorted(set(cfg.ir_levels) | {1.0}))
    report = []
    for scenario in cfg.scenarios:
        plan = ImbalancePlan(scenario, tuple(range(num_classes)), levels, n_per_class, cfg.ratio_mode)
        for level in levels:
            counts = plan_counts(plan, level)
            report.append({"scenario": scenario.value, "ir": level, "counts": counts.tolist(), "total": int(counts.sum())})
    if path is not None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scenario", "ir", *[f"n{i + 1}" for i in range(num_classes)], "total"])
            for r in report:
                w.writerow([r["scenario"], _fmt(r["ir"]), *r["counts"], r["total"]])
    return report
