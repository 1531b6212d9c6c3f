"""Command-line entry point.

Subcommands: ``run`` (single experiment), ``sweep-budget``,
``bench-predict``, ``demo-pseudo``, ``gen-synthetic``, ``inspect``.
Options can be preloaded from a ``key=value`` config file (``--config``);
explicit flags override file values.  Failures exit nonzero after printing
a machine-readable JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    ExperimentConfig,
    latency_slope,
    run_budget_sweep,
    run_experiment,
    run_pseudo_demo,
    run_timing_bench,
    write_report,
    write_sweep,
    write_timing_bench,
)
from .features import read_dataset, write_dataset
from .memory import load_store, memory_bytes
from .synthetic import make_synthetic


def _parse_config_file(path: str) -> dict[str, str]:
    values = {}
    for i, line in enumerate(Path(path).read_text().splitlines()):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{i + 1}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _parse_seeds(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split(",") if s.strip())


def _parse_budget(text: str):
    return None if text.lower() in ("none", "unlimited") else int(text)


def _parse_shots(text: str):
    return None if text.lower() == "all" else int(text)


_CONFIG_PARSERS = {
    "method": str,
    "train": str,
    "test": str,
    "out": str,
    "format": str,
    "classes_per_increment": int,
    "shots": _parse_shots,
    "distance_threshold": float,
    "budget": _parse_budget,
    "budget_policy": str,
    "pooled_merge": lambda v: v.lower() in ("1", "true", "yes"),
    "cov": str,
    "fsil": lambda v: v.lower() in ("1", "true", "yes"),
    "fsil_per_class": int,
    "seeds": _parse_seeds,
    "base_epochs": int,
    "epoch_step": int,
    "replay_lr": float,
    "replay_batch": int,
    "flb_lr": float,
    "flb_batch": int,
    "momentum": float,
    "top_n": int,
    "epsilon": float,
}


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--method")
    p.add_argument("--train", help="training CBFV/CSV file")
    p.add_argument("--test", help="test CBFV/CSV file")
    p.add_argument("--format", choices=["binary", "csv"])
    p.add_argument("--classes-per-increment", type=int, dest="classes_per_increment")
    p.add_argument("--shots", type=_parse_shots, help='per-class shot count or "all"')
    p.add_argument("--distance-threshold", type=float, dest="distance_threshold")
    p.add_argument("--budget", type=_parse_budget, help='cluster budget or "unlimited"')
    p.add_argument("--budget-policy", choices=["reduce", "remove"], dest="budget_policy")
    p.add_argument("--pooled-merge", action="store_const", const=True, default=None,
                   dest="pooled_merge")
    p.add_argument("--cov", choices=["full", "diag"])
    p.add_argument("--fsil", action="store_const", const=True, default=None)
    p.add_argument("--fsil-per-class", type=int, dest="fsil_per_class")
    p.add_argument("--seeds", type=_parse_seeds, help="comma-separated seed list")
    p.add_argument("--top-n", type=int, dest="top_n")
    p.add_argument("--out", help="JSON-lines report path")


def _collect(args: argparse.Namespace) -> dict:
    values: dict = {}
    if args.config:
        raw = _parse_config_file(args.config)
        for key, text in raw.items():
            if key not in _CONFIG_PARSERS:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = _CONFIG_PARSERS[key](text)
    for key in _CONFIG_PARSERS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _experiment_config(values: dict) -> ExperimentConfig:
    for required in ("method", "classes_per_increment", "train", "test"):
        if required not in values:
            raise ValueError(f"missing required option {required!r}")
    return ExperimentConfig(
        method=values["method"],
        classes_per_increment=values["classes_per_increment"],
        train_path=values["train"],
        test_path=values["test"],
        data_format=values.get("format", "binary"),
        shots=values.get("shots"),
        distance_threshold=values.get("distance_threshold", 20.0),
        budget=values.get("budget"),
        budget_policy=values.get("budget_policy", "reduce"),
        pooled_merge=values.get("pooled_merge", False),
        cov=values.get("cov", "full"),
        fsil=values.get("fsil", False),
        fsil_per_class=values.get("fsil_per_class", 40),
        seeds=values.get("seeds", (0,)),
        base_epochs=values.get("base_epochs", 25),
        epoch_step=values.get("epoch_step", 2),
        replay_lr=values.get("replay_lr", 0.01),
        replay_batch=values.get("replay_batch", 64),
        flb_lr=values.get("flb_lr", 0.001),
        flb_batch=values.get("flb_batch", 8),
        momentum=values.get("momentum", 0.9),
        top_n=values.get("top_n", 1),
        epsilon=values.get("epsilon", 1e-8),
    )


def _cmd_run(args) -> int:
    values = _collect(args)
    config = _experiment_config(values)
    report = run_experiment(config)
    out = values.get("out")
    if out:
        write_report(report, out)
    print(
        json.dumps(
            {
                "average_incremental_accuracy_mean": report.mean_average_accuracy,
                "average_incremental_accuracy_std": report.std_average_accuracy,
                "final_accuracy_mean": report.mean_final_accuracy,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_sweep_budget(args) -> int:
    values = _collect(args)
    config = _experiment_config(values)
    budgets = sorted(int(b) for b in args.budgets.split(","))
    points = run_budget_sweep(config, budgets)
    out = values.get("out")
    if out:
        write_sweep(points, out)
    for pt in points:
        print(
            json.dumps(
                {
                    "budget": pt.budget,
                    "reduce": pt.reduced.mean_average_accuracy,
                    "remove": pt.removed.mean_average_accuracy,
                },
                sort_keys=True,
            )
        )
    return 0


def _cmd_bench_predict(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    bench = run_timing_bench(
        sizes, queries=args.queries, dim=args.dim, top_n=args.top_n or 1,
        seed=args.seed,
    )
    if args.out:
        write_timing_bench(bench, args.out)
    for rec in bench.summary():
        print(json.dumps(rec, sort_keys=True))
    slope, pvalue = latency_slope(bench.voting_ns)
    lin_slope, _ = latency_slope(bench.linear_ns)
    print(
        json.dumps(
            {
                "record": "slopes",
                "voting_ns_per_centroid": slope,
                "voting_pvalue": pvalue,
                "linear_ns_per_centroid": lin_slope,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_demo_pseudo(args) -> int:
    dataset = read_dataset(args.train, args.format)
    result = run_pseudo_demo(
        dataset,
        args.distance_threshold,
        args.out,
        shots=args.shots,
        per_class=args.per_class,
        seed=args.seed,
    )
    print(json.dumps(result.metrics, sort_keys=True))
    return 0


def _cmd_gen_synthetic(args) -> int:
    train, test = make_synthetic(
        n_classes=args.classes,
        dim=args.dim,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        modes=(args.min_modes, args.max_modes),
        center_range=args.center_range,
        sigma=args.sigma,
        seed=args.seed,
    )
    write_dataset(train, args.train_out, args.format)
    write_dataset(test, args.test_out, args.format)
    print(
        json.dumps(
            {
                "classes": args.classes,
                "dim": args.dim,
                "train_records": len(train),
                "test_records": len(test),
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_inspect(args) -> int:
    store = load_store(args.store)
    summary = {
        "dim": store.dim,
        "mode": store.mode.value,
        "budget": store.budget,
        "total_clusters": store.total_clusters,
        "memory_bytes": memory_bytes(store),
        "classes": {
            str(cid): {
                "clusters": store.classes[cid].n_clusters,
                "original_count": store.classes[cid].original_count,
                "counts": [c.count for c in store.classes[cid].clusters],
            }
            for cid in store.class_ids()
        },
    }
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbclpr",
        description="feature-space class-incremental learning experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment over its seeds")
    _add_experiment_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep-budget", help="compare shrink policies across budgets")
    _add_experiment_flags(p)
    p.add_argument("--budgets", required=True, help="comma-separated ascending budgets")
    p.set_defaults(func=_cmd_sweep_budget)

    p = sub.add_parser("bench-predict", help="prediction latency vs. store size")
    p.add_argument("--sizes", default="100,500,1000,2000,5000")
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--top-n", type=int, dest="top_n")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bench_predict)

    p = sub.add_parser("demo-pseudo", help="2-D original vs. replayed point clouds")
    p.add_argument("--train", required=True)
    p.add_argument("--format", choices=["binary", "csv"], default="binary")
    p.add_argument("--distance-threshold", type=float, default=20.0,
                   dest="distance_threshold")
    p.add_argument("--shots", type=_parse_shots, default=None)
    p.add_argument("--per-class", type=int, default=None, dest="per_class",
                   help="fixed replay count per class (few-shot style)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_demo_pseudo)

    p = sub.add_parser("gen-synthetic", help="generate a mixture-of-Gaussians benchmark")
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--train-per-class", type=int, default=100, dest="train_per_class")
    p.add_argument("--test-per-class", type=int, default=50, dest="test_per_class")
    p.add_argument("--min-modes", type=int, default=1, dest="min_modes")
    p.add_argument("--max-modes", type=int, default=3, dest="max_modes")
    p.add_argument("--center-range", type=float, default=40.0, dest="center_range")
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["binary", "csv"], default="binary")
    p.add_argument("--train-out", required=True, dest="train_out")
    p.add_argument("--test-out", required=True, dest="test_out")
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("inspect", help="summarize a CBMS memory snapshot")
    p.add_argument("--store", required=True)
    p.set_defaults(func=_cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # report failures as machine-readable records
        record = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
