"""Experiment driver: sequential training over a task partition.

One experiment = one (method, partition, seed) cell: initialize a model,
split the training set into ordered tasks, train them in sequence with the
chosen mitigation (none, weight anchoring, replay, or both), and fill a
retention matrix by re-evaluating every earlier task after each one.  A
suite runs the full grid and writes one JSON record per run plus a summary
CSV; plot-data emission flattens the records into tidy CSVs.

All randomness derives from the run's master seed through named streams,
so a record is reproducible bit for bit regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .continual import (
    EwcConfig,
    ReplayBuffer,
    build_replay_buffer,
    compute_fisher_diagonal,
    ewc_penalty_gradients,
    make_anchor,
)
from .dataset import (
    PARTITION_STRATEGIES,
    RANDOM,
    RELATION_ROUNDROBIN,
    KnowledgeGraph,
    TaskPartition,
    load_triple_dataset,
    partition_random,
    partition_relation_roundrobin,
)
from .evaluation import (
    FilterIndex,
    RetentionMatrix,
    forgetting_report,
    retention_update,
)
from .optim import AdamState, TrainConfig, TrainLog, train_task
from .seeds import substream
from .transe import ModelConfig, TransEModel, init_embeddings

METHOD_NAIVE = "naive"
METHOD_EWC = "ewc"
METHOD_REPLAY = "replay"
METHOD_EWC_REPLAY = "ewc_replay"
METHODS = (METHOD_NAIVE, METHOD_EWC, METHOD_REPLAY, METHOD_EWC_REPLAY)

DEFAULT_SEEDS = (42, 123, 456, 789, 2024)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a single run."""

    method: str = METHOD_NAIVE
    lam: float = 1.0
    replay_mode: str = "random"
    replay_size: int = 500
    partition: str = RELATION_ROUNDROBIN
    num_tasks: int = 4
    seed: int = 42
    dim: int = 50
    margin: float = 1.0
    epochs: int = 20
    batch_size: int = 256
    learning_rate: float = 0.001
    reset_adam_between_tasks: bool = False
    eval_batch_size: int = 512

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; known: {METHODS}")
        if self.partition not in PARTITION_STRATEGIES:
            raise ValueError(
                f"unknown partition {self.partition!r}; known: {PARTITION_STRATEGIES}"
            )

    @property
    def uses_ewc(self) -> bool:
        return self.method in (METHOD_EWC, METHOD_EWC_REPLAY)

    @property
    def uses_replay(self) -> bool:
        return self.method in (METHOD_REPLAY, METHOD_EWC_REPLAY)

    def label(self) -> str:
        """Filename-safe method tag, e.g. ``ewc_lam10`` or ``replay_wave``."""
        lam = format(self.lam, "g")
        if self.method == METHOD_EWC:
            return f"ewc_lam{lam}"
        if self.method == METHOD_REPLAY:
            return f"replay_{self.replay_mode}"
        if self.method == METHOD_EWC_REPLAY:
            return f"ewc_lam{lam}_{self.replay_mode}"
        return METHOD_NAIVE


def build_partition(graph: KnowledgeGraph, config: ExperimentConfig) -> TaskPartition:
    if config.partition == RELATION_ROUNDROBIN:
        return partition_relation_roundrobin(graph, config.num_tasks)
    return partition_random(
        graph, config.num_tasks, substream(config.seed, "partition")
    )


@dataclass(eq=False)
class ResultsRecord:
    """Serializable outcome of one experiment."""

    config: ExperimentConfig
    retention: RetentionMatrix
    train_logs: list[TrainLog]
    wall_seconds: float
    num_entities: int
    num_relations: int

    def report(self):
        return forgetting_report(self.retention)

    def to_dict(self) -> dict:
        values = self.retention.values
        return {
            "config": asdict(self.config),
            "method_label": self.config.label(),
            "retention": [
                [None if np.isnan(x) else float(x) for x in row] for row in values
            ],
            "eval_sizes": [int(x) for x in self.retention.eval_sizes],
            "report": self.report().as_dict(),
            "train_logs": [log.as_dict() for log in self.train_logs],
            "wall_seconds": float(self.wall_seconds),
            "num_entities": int(self.num_entities),
            "num_relations": int(self.num_relations),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ResultsRecord":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        config = ExperimentConfig(**raw["config"])
        values = np.array(
            [[np.nan if x is None else x for x in row] for row in raw["retention"]]
        )
        matrix = RetentionMatrix(
            values=values, eval_sizes=np.asarray(raw["eval_sizes"], dtype=np.int64)
        )
        logs = [
            TrainLog(
                num_task_triples=d["num_task_triples"],
                num_replay_triples=d["num_replay_triples"],
                epoch_loss=np.asarray(d["epoch_loss"]),
                epoch_pairs=np.asarray(d["epoch_pairs"], dtype=np.int64),
                epoch_active=np.asarray(d["epoch_active"], dtype=np.int64),
            )
            for d in raw["train_logs"]
        ]
        return cls(
            config=config,
            retention=matrix,
            train_logs=logs,
            wall_seconds=raw["wall_seconds"],
            num_entities=raw["num_entities"],
            num_relations=raw["num_relations"],
        )

    def filename(self) -> str:
        return record_filename(self.config)


def record_filename(config: ExperimentConfig) -> str:
    """Canonical on-disk name for a run, derived from its config alone."""
    c = config
    return f"run_{c.label()}_{c.partition}_T{c.num_tasks}_seed{c.seed}.json"


def run_experiment(
    graph: KnowledgeGraph,
    config: ExperimentConfig,
    log_fn: Callable[[str], None] | None = None,
) -> ResultsRecord:
    """Train all tasks in order and return the filled retention record.

    The model and optimizer state live across tasks; anchors accumulate one
    per finished task (none for the last task, which nothing trains after),
    and replay selections are drawn from every task after it is trained.
    """
    start = time.perf_counter()
    say = log_fn or (lambda _msg: None)
    partition = build_partition(graph, config)
    tasks = partition.train_tasks
    eval_tasks = partition.eval_tasks

    model = init_embeddings(
        graph.num_entities,
        graph.num_relations,
        ModelConfig(dim=config.dim, margin=config.margin),
        np.random.Generator(np.random.PCG64(substream(config.seed, "init"))),
    )
    adam = AdamState.zeros(graph.num_entities, graph.num_relations, config.dim)
    train_config = TrainConfig(
        epochs=config.epochs,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
    )
    ewc_config = EwcConfig(lam=config.lam)
    index = FilterIndex.from_splits(graph.train, graph.valid, graph.test)
    matrix = RetentionMatrix.empty(config.num_tasks, [len(e) for e in eval_tasks])

    anchors = []
    buffer = ReplayBuffer(mode=config.replay_mode) if config.uses_replay else None
    logs: list[TrainLog] = []

    for k in range(config.num_tasks):
        if config.reset_adam_between_tasks:
            adam = AdamState.zeros(graph.num_entities, graph.num_relations, config.dim)
        replay_pool = buffer.pool() if buffer is not None and k > 0 else None
        penalty_fn = None
        if config.uses_ewc:
            penalty_fn = lambda m: ewc_penalty_gradients(m, anchors, ewc_config)
        log = train_task(
            model,
            adam,
            tasks[k],
            train_config,
            substream(config.seed, "train", k),
            penalty_grad_fn=penalty_fn,
            replay=replay_pool,
        )
        logs.append(log)
        if config.uses_ewc and k < config.num_tasks - 1:
            # the final task's anchor would never be consulted
            fisher = compute_fisher_diagonal(
                model,
                tasks[k],
                substream(config.seed, "fisher", k),
                batch_size=ewc_config.fisher_batch_size,
            )
            anchors.append(make_anchor(k, model, fisher))
        if buffer is not None:
            buffer.add_task(
                build_replay_buffer(
                    tasks[k],
                    config.replay_size,
                    config.replay_mode,
                    substream(config.seed, "replay", k),
                )
            )
        retention_update(
            matrix, model, index, eval_tasks, k, batch_size=config.eval_batch_size
        )
        say(
            f"[{config.label()}/{config.partition}/seed{config.seed}] "
            f"task {k}: train={len(tasks[k])} "
            f"loss={log.epoch_loss[-1] if len(log.epoch_loss) else 0.0:.1f} "
            f"mrr_row={np.round(matrix.values[k, : k + 1], 4).tolist()}"
        )

    return ResultsRecord(
        config=config,
        retention=matrix,
        train_logs=logs,
        wall_seconds=time.perf_counter() - start,
        num_entities=graph.num_entities,
        num_relations=graph.num_relations,
    )


def grid_configs(
    base: ExperimentConfig,
    seeds: Iterable[int] = DEFAULT_SEEDS,
    partitions: Iterable[str] = (RELATION_ROUNDROBIN, RANDOM),
) -> list[ExperimentConfig]:
    """The full method grid crossed with seeds and partition strategies.

    Methods: no mitigation, anchoring at strengths 0.1 / 1 / 10, anchoring
    at 10 combined with each replay flavor, and the two plain replays.
    """
    methods = [
        dict(method=METHOD_NAIVE),
        dict(method=METHOD_EWC, lam=0.1),
        dict(method=METHOD_EWC, lam=1.0),
        dict(method=METHOD_EWC, lam=10.0),
        dict(method=METHOD_EWC_REPLAY, lam=10.0, replay_mode="wave"),
        dict(method=METHOD_EWC_REPLAY, lam=10.0, replay_mode="random"),
        dict(method=METHOD_REPLAY, replay_mode="random"),
        dict(method=METHOD_REPLAY, replay_mode="wave"),
    ]
    return [
        replace(base, seed=seed, partition=partition, **overrides)
        for partition in partitions
        for overrides in methods
        for seed in seeds
    ]


def _run_to_file(args: tuple[KnowledgeGraph, ExperimentConfig, str]) -> str:
    graph, config, out_dir = args
    record = run_experiment(graph, config)
    path = Path(out_dir) / record.filename()
    record.save(path)
    return str(path)


def run_suite(
    graph: KnowledgeGraph,
    out_dir: str | Path,
    configs: Iterable[ExperimentConfig] | None = None,
    base: ExperimentConfig | None = None,
    seeds: Iterable[int] = DEFAULT_SEEDS,
    partitions: Iterable[str] = (RELATION_ROUNDROBIN, RANDOM),
    workers: int = 1,
    log_fn: Callable[[str], None] | None = None,
) -> list[Path]:
    """Run a config grid, writing one record per run plus ``summary.csv``.

    Explicit ``configs`` override the grid; otherwise the grid is built
    from ``base`` (or defaults) crossed with seeds and partitions.  With
    ``workers > 1`` runs execute in separate processes; results are
    identical either way because each run owns its seed streams.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    say = log_fn or (lambda _msg: None)
    if configs is None:
        configs = grid_configs(base or ExperimentConfig(), seeds, partitions)
    configs = list(configs)

    jobs = [(graph, config, str(out_dir)) for config in configs]
    paths: list[Path] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, path in enumerate(pool.map(_run_to_file, jobs)):
                say(f"[{i + 1}/{len(jobs)}] wrote {path}")
                paths.append(Path(path))
    else:
        for i, job in enumerate(jobs):
            path = Path(_run_to_file(job))
            say(f"[{i + 1}/{len(jobs)}] wrote {path}")
            paths.append(path)

    write_summary_csv(out_dir, load_records(out_dir))
    return paths


def load_records(records_dir: str | Path) -> list[ResultsRecord]:
    paths = sorted(Path(records_dir).glob("run_*.json"))
    return [ResultsRecord.load(p) for p in paths]


def write_summary_csv(out_dir: str | Path, records: list[ResultsRecord]) -> Path:
    path = Path(out_dir) / "summary.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "method",
                "partition",
                "seed",
                "num_tasks",
                "mean_forgetting_pp",
                "final_mrr",
                "final_mrr_pooled",
                "wall_seconds",
            ]
        )
        for rec in records:
            rep = rec.report()
            writer.writerow(
                [
                    rec.config.label(),
                    rec.config.partition,
                    rec.config.seed,
                    rec.config.num_tasks,
                    f"{100.0 * rep.mean_forgetting:.4f}",
                    f"{rep.final_mrr:.6f}",
                    f"{rep.final_mrr_pooled:.6f}",
                    f"{rec.wall_seconds:.1f}",
                ]
            )
    return path


def aggregate_records(
    records: list[ResultsRecord],
) -> dict[tuple[str, str], dict[str, float]]:
    """Per (method, partition) mean and sample std over seeds.

    Forgetting comes back in percentage points; MRR stays a fraction.
    """
    groups: dict[tuple[str, str], list[ResultsRecord]] = {}
    for rec in records:
        groups.setdefault((rec.config.label(), rec.config.partition), []).append(rec)
    out: dict[tuple[str, str], dict[str, float]] = {}
    for key, recs in sorted(groups.items()):
        forgetting = np.array([100.0 * r.report().mean_forgetting for r in recs])
        final = np.array([r.report().final_mrr for r in recs])
        out[key] = {
            "n": len(recs),
            "forgetting_mean_pp": float(np.mean(forgetting)),
            "forgetting_std_pp": float(np.std(forgetting, ddof=1)) if len(recs) > 1 else 0.0,
            "final_mrr_mean": float(np.mean(final)),
            "final_mrr_std": float(np.std(final, ddof=1)) if len(recs) > 1 else 0.0,
        }
    return out


def format_report(records: list[ResultsRecord]) -> str:
    """Aggregate table, one line per (method, partition) cell."""
    agg = aggregate_records(records)
    lines = [
        f"{'method':<22} {'partition':<20} {'n':>3} "
        f"{'forgetting_pp':>16} {'final_mrr':>16}"
    ]
    for (method, partition), stats in agg.items():
        lines.append(
            f"{method:<22} {partition:<20} {stats['n']:>3.0f} "
            f"{stats['forgetting_mean_pp']:>8.2f} ± {stats['forgetting_std_pp']:<5.2f} "
            f"{stats['final_mrr_mean']:>8.3f} ± {stats['final_mrr_std']:<5.3f}"
        )
    return "\n".join(lines) + "\n"


def emit_plot_data(records_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Flatten run records into tidy CSVs ready for plotting.

    Writes ``retention_curves.csv`` (one row per retention-matrix entry),
    ``lambda_sweep.csv`` (anchoring-only runs), and
    ``forgetting_summary.csv`` (per method and partition aggregates).
    """
    records_dir = Path(records_dir)
    out_dir = Path(out_dir) if out_dir is not None else records_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    records = load_records(records_dir)
    written: list[Path] = []

    path = out_dir / "retention_curves.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "partition", "seed", "after_task", "eval_task", "mrr"])
        for rec in records:
            values = rec.retention.values
            for i in range(rec.config.num_tasks):
                for j in range(i + 1):
                    writer.writerow(
                        [
                            rec.config.label(),
                            rec.config.partition,
                            rec.config.seed,
                            i,
                            j,
                            f"{values[i, j]:.6f}",
                        ]
                    )
    written.append(path)

    path = out_dir / "lambda_sweep.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["partition", "lam", "seed", "mean_forgetting_pp", "final_mrr"])
        for rec in records:
            if rec.config.method != METHOD_EWC:
                continue
            rep = rec.report()
            writer.writerow(
                [
                    rec.config.partition,
                    format(rec.config.lam, "g"),
                    rec.config.seed,
                    f"{100.0 * rep.mean_forgetting:.4f}",
                    f"{rep.final_mrr:.6f}",
                ]
            )
    written.append(path)

    path = out_dir / "forgetting_summary.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "method",
                "partition",
                "n",
                "forgetting_mean_pp",
                "forgetting_std_pp",
                "final_mrr_mean",
                "final_mrr_std",
            ]
        )
        for (method, partition), stats in aggregate_records(records).items():
            writer.writerow(
                [
                    method,
                    partition,
                    int(stats["n"]),
                    f"{stats['forgetting_mean_pp']:.4f}",
                    f"{stats['forgetting_std_pp']:.4f}",
                    f"{stats['final_mrr_mean']:.6f}",
                    f"{stats['final_mrr_std']:.6f}",
                ]
            )
    written.append(path)
    return written


def partition_audit(
    data_dir: str | Path, partition: str, num_tasks: int, seed: int
) -> str:
    """Manifest plus balance statistics for a dataset's partition."""
    graph = load_triple_dataset(data_dir)
    config = ExperimentConfig(partition=partition, num_tasks=num_tasks, seed=seed)
    part = build_partition(graph, config)
    sizes = np.array([len(t) for t in part.train_tasks])
    lines = [part.manifest()]
    lines.append(
        f"# train sizes: min={sizes.min()} max={sizes.max()} "
        f"mean={sizes.mean():.1f} spread={(sizes.max() - sizes.min()) / sizes.mean():.3f}"
    )
    return "\n".join(lines) + "\n"
