"""Feature-space class-incremental learning with cluster memory and
Gaussian pseudo-rehearsal."""

from .features import (
    DatasetFormatError,
    FeatureDataset,
    FeatureRecord,
    read_dataset,
    split_by_class,
    write_dataset,
)
from .clustering import Cluster, CovarianceMode, cluster_class, kmeans_class
from .memory import (
    ClassMemory,
    MemoryStore,
    absorb,
    load_store,
    memory_bytes,
    reduce,
    remove_only,
    save_store,
)
from .rehearsal import (
    PseudoExemplarSet,
    RehearsalMode,
    RehearsalPlan,
    build_training_mix,
    fsil_allocation,
    generate,
    sample_cluster,
)
from .classifier import (
    EvalResult,
    LinearClassifier,
    TrainConfig,
    TrainResult,
    evaluate,
    grow,
    load_classifier,
    predict,
    predict_batch,
    predict_proba,
    save_classifier,
    train,
)
from .voting import (
    CentroidIndex,
    VotingConfig,
    predict_ncm,
    predict_ncm_batch,
    predict_voting,
    predict_voting_batch,
)
from .synthetic import make_synthetic
from .harness import (
    ExperimentConfig,
    IncrementSchedule,
    Method,
    RunReport,
    TrainingSource,
    make_schedule,
    run_budget_sweep,
    run_experiment,
    run_pseudo_demo,
    run_timing_bench,
    write_report,
)

__version__ = "0.1.0"

__all__ = [
    "Cluster",
    "ClassMemory",
    "CentroidIndex",
    "CovarianceMode",
    "DatasetFormatError",
    "EvalResult",
    "ExperimentConfig",
    "FeatureDataset",
    "FeatureRecord",
    "IncrementSchedule",
    "LinearClassifier",
    "MemoryStore",
    "Method",
    "PseudoExemplarSet",
    "RehearsalMode",
    "RehearsalPlan",
    "RunReport",
    "TrainConfig",
    "TrainResult",
    "TrainingSource",
    "VotingConfig",
    "absorb",
    "build_training_mix",
    "cluster_class",
    "evaluate",
    "fsil_allocation",
    "generate",
    "grow",
    "kmeans_class",
    "load_classifier",
    "load_store",
    "make_schedule",
    "make_synthetic",
    "memory_bytes",
    "predict",
    "predict_batch",
    "predict_ncm",
    "predict_ncm_batch",
    "predict_proba",
    "predict_voting",
    "predict_voting_batch",
    "read_dataset",
    "reduce",
    "remove_only",
    "run_budget_sweep",
    "run_experiment",
    "run_pseudo_demo",
    "run_timing_bench",
    "sample_cluster",
    "save_classifier",
    "save_store",
    "split_by_class",
    "train",
    "write_dataset",
    "write_report",
]
