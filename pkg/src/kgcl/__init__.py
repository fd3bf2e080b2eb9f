"""Continual-learning experiments for translation-based KG embeddings."""

from .continual import (
    EwcAnchor,
    EwcConfig,
    FisherDiagonal,
    ReplayBuffer,
    build_replay_buffer,
    compute_fisher_diagonal,
    ewc_penalty,
    ewc_penalty_gradients,
    make_anchor,
)
from .dataset import (
    KnowledgeGraph,
    RawTriple,
    TaskPartition,
    build_graph,
    load_triple_dataset,
    parse_triple_file,
    partition_random,
    partition_relation_roundrobin,
    write_triple_file,
)
from .evaluation import (
    FilterIndex,
    ForgettingReport,
    RetentionMatrix,
    eval_ranks,
    filtered_rank,
    forgetting_report,
    mrr,
    retention_update,
)
from .harness import (
    ExperimentConfig,
    ResultsRecord,
    emit_plot_data,
    grid_configs,
    record_filename,
    run_experiment,
    run_suite,
)
from .optim import (
    AdamState,
    NegativeSample,
    SparseGradient,
    TrainConfig,
    TrainLog,
    adam_step,
    loss_gradients,
    margin_loss,
    sample_negative,
    train_task,
)
from .seeds import make_rng, substream
from .transe import (
    ModelConfig,
    TransEModel,
    init_embeddings,
    load_checkpoint,
    normalize_entities,
    save_checkpoint,
    score,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "EwcAnchor",
    "EwcConfig",
    "ExperimentConfig",
    "FilterIndex",
    "FisherDiagonal",
    "ForgettingReport",
    "KnowledgeGraph",
    "ModelConfig",
    "NegativeSample",
    "RawTriple",
    "ReplayBuffer",
    "ResultsRecord",
    "RetentionMatrix",
    "SparseGradient",
    "TaskPartition",
    "TrainConfig",
    "TrainLog",
    "TransEModel",
    "adam_step",
    "build_graph",
    "build_replay_buffer",
    "compute_fisher_diagonal",
    "emit_plot_data",
    "eval_ranks",
    "ewc_penalty",
    "ewc_penalty_gradients",
    "filtered_rank",
    "forgetting_report",
    "grid_configs",
    "init_embeddings",
    "load_checkpoint",
    "load_triple_dataset",
    "loss_gradients",
    "make_anchor",
    "make_rng",
    "margin_loss",
    "mrr",
    "normalize_entities",
    "parse_triple_file",
    "partition_random",
    "partition_relation_roundrobin",
    "record_filename",
    "retention_update",
    "run_experiment",
    "run_suite",
    "sample_negative",
    "save_checkpoint",
    "score",
    "substream",
    "train_task",
    "write_triple_file",
]
