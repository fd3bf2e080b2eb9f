"""Command-line front end: run, suite, report, partition-audit.

Dataset and output locations default to the KGCL_DATA_DIR and KGCL_OUT_DIR
environment variables; every other knob is a flag.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .dataset import PARTITION_STRATEGIES, RELATION_ROUNDROBIN, load_triple_dataset
from .harness import (
    DEFAULT_SEEDS,
    METHODS,
    ExperimentConfig,
    emit_plot_data,
    format_report,
    load_records,
    partition_audit,
    run_experiment,
    run_suite,
)


def _default_data_dir() -> str | None:
    return os.environ.get("KGCL_DATA_DIR")


def _default_out_dir() -> str:
    return os.environ.get("KGCL_OUT_DIR", "results")


def _add_data_dir(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--data-dir",
        default=_default_data_dir(),
        help="directory holding train.txt/valid.txt/test.txt "
        "(default: $KGCL_DATA_DIR)",
    )


def _add_common_hparams(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-T", "--num-tasks", type=int, default=4)
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument("--dim", type=int, default=50)
    parser.add_argument("--margin", type=float, default=1.0)
    parser.add_argument("--learning-rate", type=float, default=0.001)
    parser.add_argument("--replay-size", type=int, default=500)
    parser.add_argument(
        "--reset-adam",
        action="store_true",
        help="start each task from fresh optimizer moments",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgcl",
        description="Sequential knowledge-graph embedding experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single experiment")
    _add_data_dir(p_run)
    p_run.add_argument("--out-dir", default=_default_out_dir())
    p_run.add_argument("--method", choices=METHODS, default="naive")
    p_run.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_run.add_argument("--replay-mode", choices=("random", "wave"), default="random")
    p_run.add_argument(
        "--partition", choices=PARTITION_STRATEGIES, default=RELATION_ROUNDROBIN
    )
    p_run.add_argument("--seed", type=int, default=42)
    _add_common_hparams(p_run)

    p_suite = sub.add_parser("suite", help="run the full method grid")
    _add_data_dir(p_suite)
    p_suite.add_argument("--out-dir", default=_default_out_dir())
    p_suite.add_argument(
        "--seeds",
        default=",".join(str(s) for s in DEFAULT_SEEDS),
        help="comma-separated master seeds",
    )
    p_suite.add_argument(
        "--partitions",
        default="both",
        choices=("both",) + PARTITION_STRATEGIES,
    )
    p_suite.add_argument("--workers", type=int, default=1)
    _add_common_hparams(p_suite)

    p_report = sub.add_parser("report", help="aggregate run records")
    p_report.add_argument("--out-dir", default=_default_out_dir())
    p_report.add_argument(
        "--plot-data",
        action="store_true",
        help="also write tidy CSVs next to the records",
    )

    p_audit = sub.add_parser("partition-audit", help="print a partition manifest")
    _add_data_dir(p_audit)
    p_audit.add_argument(
        "--partition", choices=PARTITION_STRATEGIES, default=RELATION_ROUNDROBIN
    )
    p_audit.add_argument("-T", "--num-tasks", type=int, default=4)
    p_audit.add_argument("--seed", type=int, default=42)
    return parser


def _require_data_dir(args: argparse.Namespace) -> Path:
    if not args.data_dir:
        raise SystemExit("no dataset directory: pass --data-dir or set KGCL_DATA_DIR")
    path = Path(args.data_dir)
    if not path.is_dir():
        raise SystemExit(f"dataset directory not found: {path}")
    return path


def _config_from_args(args: argparse.Namespace, **overrides) -> ExperimentConfig:
    return ExperimentConfig(
        method=overrides.pop("method", getattr(args, "method", "naive")),
        lam=overrides.pop("lam", getattr(args, "lam", 1.0)),
        replay_mode=getattr(args, "replay_mode", "random"),
        replay_size=args.replay_size,
        partition=overrides.pop("partition", getattr(args, "partition", RELATION_ROUNDROBIN)),
        num_tasks=args.num_tasks,
        seed=overrides.pop("seed", getattr(args, "seed", 42)),
        dim=args.dim,
        margin=args.margin,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        reset_adam_between_tasks=args.reset_adam,
        **overrides,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "run":
        graph = load_triple_dataset(_require_data_dir(args))
        config = _config_from_args(args)
        record = run_experiment(graph, config, log_fn=print)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / record.filename()
        record.save(path)
        report = record.report()
        print(f"wrote {path}")
        print(
            f"mean_forgetting={100.0 * report.mean_forgetting:.2f}pp "
            f"final_mrr={report.final_mrr:.4f}"
        )
        return 0

    if args.command == "suite":
        graph = load_triple_dataset(_require_data_dir(args))
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        partitions = (
            PARTITION_STRATEGIES if args.partitions == "both" else (args.partitions,)
        )
        base = _config_from_args(args)
        run_suite(
            graph,
            args.out_dir,
            base=base,
            seeds=seeds,
            partitions=partitions,
            workers=args.workers,
            log_fn=print,
        )
        print(format_report(load_records(args.out_dir)), end="")
        return 0

    if args.command == "report":
        records = load_records(args.out_dir)
        if not records:
            raise SystemExit(f"no run records under {args.out_dir}")
        print(format_report(records), end="")
        if args.plot_data:
            for path in emit_plot_data(args.out_dir):
                print(f"wrote {path}")
        return 0

    if args.command == "partition-audit":
        text = partition_audit(
            _require_data_dir(args), args.partition, args.num_tasks, args.seed
        )
        print(text, end="")
        return 0

    raise SystemExit(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
