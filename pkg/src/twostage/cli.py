"""Command-line entry point: ``twostage <command> [options]``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 grid finished
with some failed cells.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .dataset import DataError, class_counts, derive_seed, load_csv, make_rng, save_csv
from .harness import (
    ExperimentConfig,
    SyntheticSpec,
    baseline_ir_study,
    describe_imbalance,
    format_summary,
    generate_synthetic,
    run_grid,
    summarize,
)
from .imbalance import RatioMode
from .model import NetConfig, TrainConfig, save_network
from .pipeline import ConfigError, StrategySpec, evaluate, run_strategy
from .resampling import ResamplerKind, resample

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3

log = logging.getLogger("twostage")


def _csv_list(kind):
    def parse(text):
        return [kind(v) for v in text.split(",") if v.strip()]

    return parse


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment")
    g.add_argument("--config", type=Path, help="JSON experiment config")
    g.add_argument("--dataset", help="dataset CSV (default: synthetic blobs)")
    g.add_argument("--folds", type=int, dest="num_folds")
    g.add_argument("--fold-limit", type=int, help="run only the first N folds")
    g.add_argument("--scenarios", type=_csv_list(str), help="comma list, e.g. linear,single_majority")
    g.add_argument("--ir-levels", type=_csv_list(float))
    g.add_argument("--strategies", type=_csv_list(str), help="e.g. baseline,is:smote,ts:smote+rus")
    g.add_argument("--k", type=int, dest="smote_k", help="SMOTE neighbours")
    g.add_argument("--body-dims", type=_csv_list(int))
    g.add_argument("--head-hidden", type=int)
    g.add_argument("--ratio-mode", choices=[m.value for m in RatioMode])
    g.add_argument("--output-dir")
    g.add_argument("--seed", type=int, dest="master_seed")
    g.add_argument("--workers", type=int)
    g.add_argument("--serial", action="store_true", help="force a single worker")
    g.add_argument("--strict", action="store_true", default=None, help="abort on the first failed cell")
    t = p.add_argument_group("training")
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float, dest="learning_rate")
    t.add_argument("--rho", type=float)
    t.add_argument("--epsilon", type=float)
    t.add_argument("--finetune-epochs", type=int)
    t.add_argument("--finetune-lr", type=float)
    s = p.add_argument_group("synthetic data")
    s.add_argument("--classes", type=int, dest="num_classes")
    s.add_argument("--per-class", type=int, dest="samples_per_class")
    s.add_argument("--dims", type=int)
    s.add_argument("--spread", type=float, dest="cluster_spread")
    s.add_argument("--separation", type=float, dest="class_separation")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if getattr(args, "config", None) else ExperimentConfig()

    simple = ("num_folds", "fold_limit", "scenarios", "ir_levels", "strategies", "smote_k",
              "body_dims", "head_hidden", "ratio_mode", "output_dir", "master_seed", "workers", "strict")
    updates = {k: getattr(args, k) for k in simple if getattr(args, k, None) is not None}
    if getattr(args, "serial", False):
        updates["workers"] = 1
    if getattr(args, "dataset", None):
        updates["dataset"] = args.dataset
    synth = {k: getattr(args, k) for k in ("num_classes", "samples_per_class", "dims", "cluster_spread", "class_separation")
             if getattr(args, k, None) is not None}
    if synth:
        if isinstance(cfg.dataset, SyntheticSpec) and "dataset" not in updates:
            updates["dataset"] = replace(cfg.dataset, **synth)
        else:
            raise ConfigError("synthetic-data flags conflict with a dataset file")
    train = {k: getattr(args, k) for k in ("epochs", "batch_size", "learning_rate", "rho", "epsilon")
             if getattr(args, k, None) is not None}
    if train:
        updates["train"] = replace(cfg.train, **train)
    ft = {}
    if getattr(args, "finetune_epochs", None) is not None:
        ft["epochs"] = args.finetune_epochs
    if getattr(args, "finetune_lr", None) is not None:
        ft["learning_rate"] = args.finetune_lr
    if ft:
        updates["finetune"] = replace(cfg.stage2 if "train" not in updates else (cfg.finetune or updates["train"]), **ft)
    return ExperimentConfig.from_dict(cfg.to_dict() | updates)


def cmd_generate(args) -> int:
    spec = SyntheticSpec(
        args.num_classes or 8, args.samples_per_class or 200, args.dims or 16,
        args.cluster_spread or 1.0, args.class_separation or 3.0,
    )
    ds = generate_synthetic(spec, make_rng(derive_seed(args.master_seed or 0, "data")))
    save_csv(ds, args.out)
    print(f"wrote {len(ds)} rows x {ds.dim} features ({ds.num_classes} classes) to {args.out}")
    return EXIT_OK


def cmd_describe(args) -> int:
    cfg = build_config(args)
    report = describe_imbalance(cfg, args.n, args.num_classes, args.out)
    for r in report:
        print(f"{r['scenario']:<16} IR={r['ir']:<5g} total={r['total']:<6} {r['counts']}")
    return EXIT_OK


def cmd_resample(args) -> int:
    ds = load_csv(args.input)
    method = ResamplerKind.parse(args.method, args.k)
    out = resample(ds, method, make_rng(derive_seed(args.seed, "resample")))
    save_csv(out, args.output)
    print(f"{args.method}: {class_counts(ds).tolist()} -> {class_counts(out).tolist()}")
    return EXIT_OK


def cmd_train(args) -> int:
    train_ds = load_csv(args.train)
    spec = StrategySpec.parse(args.strategy, args.k)
    net_cfg = NetConfig(train_ds.dim, tuple(args.body_dims), args.head_hidden, train_ds.num_classes)
    stage1 = TrainConfig(args.epochs, args.batch_size, args.lr)
    stage2 = TrainConfig(args.finetune_epochs or args.epochs, args.batch_size, args.finetune_lr or args.lr)
    net = run_strategy(train_ds, spec, net_cfg, stage1, stage2, args.seed)
    save_network(net, args.model_out)
    print(f"saved {spec.name} network to {args.model_out}")
    if args.test:
        test_ds = load_csv(args.test)
        ev = evaluate(net, test_ds)
        print(json.dumps(ev.as_dict(), indent=2))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = build_config(args)
    outcome = run_grid(cfg)
    print(f"{outcome.cells} cells ({outcome.skipped} resumed, {outcome.computed} computed, "
          f"{outcome.errors} failed) -> {outcome.path}")
    return EXIT_PARTIAL if outcome.errors else EXIT_OK


def cmd_ir_study(args) -> int:
    cfg = build_config(args)
    path = baseline_ir_study(cfg)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    summary = summarize(args.results, args.out_dir)
    print(format_summary(summary))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twostage", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic Gaussian-blob dataset")
    p.add_argument("out", type=Path)
    p.add_argument("--classes", type=int, dest="num_classes")
    p.add_argument("--per-class", type=int, dest="samples_per_class")
    p.add_argument("--dims", type=int)
    p.add_argument("--spread", type=float, dest="cluster_spread")
    p.add_argument("--separation", type=float, dest="class_separation")
    p.add_argument("--seed", type=int, dest="master_seed", default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("describe-imbalance", help="target class counts per scenario and IR")
    _add_experiment_flags(p)
    p.add_argument("--n", type=int, help="samples per class in the balanced source")
    p.add_argument("--out", type=Path, help="CSV output path")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("resample", help="rebalance a dataset CSV")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--method", required=True, choices=["rus", "ros", "smote"])
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("train", help="train one strategy and save the network")
    p.add_argument("train", type=Path)
    p.add_argument("model_out", type=Path)
    p.add_argument("--test", type=Path, help="evaluate on this CSV")
    p.add_argument("--strategy", default="ts:smote+rus")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--body-dims", type=_csv_list(int), default=[64, 32])
    p.add_argument("--head-hidden", type=int, default=32)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--finetune-epochs", type=int)
    p.add_argument("--finetune-lr", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (
        ("run", cmd_run, "run the full experiment grid"),
        ("ir-study", cmd_ir_study, "baseline performance against IR"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_experiment_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("summarize", help="per-setting and overall tables with average ranks")
    p.add_argument("results", type=Path)
    p.add_argument("--out-dir", type=Path)
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
