"""Class-incremental experiment runner.

Orchestrates the per-increment pipeline (shot selection, clustering,
memory absorption with budget enforcement, pseudo-rehearsal, classifier
training, evaluation on the cumulative test set) for every supported
method, sweeps seeds and memory budgets, benchmarks prediction latency
against memory size, and emits JSON-lines reports.

Reports are deterministic: re-running with the same config and seeds
produces byte-identical files.  Wall-clock phase timings are therefore
written to a separate ``<out>.timings`` sidecar, never into the report.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .classifier import (
    LinearClassifier,
    TrainConfig,
    evaluate,
    grow,
    train,
)
from .clustering import Cluster, CovarianceMode, cluster_class, kmeans_class
from .features import FeatureDataset, read_dataset, split_by_class, write_dataset
from .memory import ClassMemory, MemoryStore, absorb, memory_bytes
from .rehearsal import (
    PseudoExemplarSet,
    RehearsalMode,
    RehearsalPlan,
    build_training_mix,
    generate,
)
from .voting import CentroidIndex, VotingConfig, predict_ncm_batch


class Method(Enum):
    CBCL_PR = "cbcl_pr"
    CBCL_PR_DIAG = "cbcl_pr_diag"
    CBCL = "cbcl"
    NCM = "ncm"
    KMEANS_PR = "kmeans_pr"
    KMEANS = "kmeans"
    FT = "ft"
    FLB = "flb"


STORE_METHODS = {
    Method.CBCL_PR,
    Method.CBCL_PR_DIAG,
    Method.CBCL,
    Method.NCM,
    Method.KMEANS_PR,
    Method.KMEANS,
}
REPLAY_METHODS = {Method.CBCL_PR, Method.CBCL_PR_DIAG, Method.KMEANS_PR}
VOTING_METHODS = {Method.CBCL, Method.KMEANS}
KMEANS_BACKED = {Method.KMEANS_PR, Method.KMEANS}

_MASK64 = (1 << 64) - 1


def derive_seed(*parts: int) -> int:
    """Stable 64-bit sub-seed from integer parts, independent of call order
    elsewhere (pure function of the parts)."""
    return int(
        np.random.SeedSequence([p & _MASK64 for p in parts]).generate_state(1)[0]
    )


@dataclass
class IncrementSchedule:
    """Ordered partition of class IDs into increments."""

    class_order: list[int]
    classes_per_increment: int
    shots: int | None = None  # None = all available records

    def __post_init__(self):
        if self.classes_per_increment < 1:
            raise ValueError("classes_per_increment must be positive")
        if len(set(self.class_order)) != len(self.class_order):
            raise ValueError("class_order contains duplicates")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive")

    def increments(self) -> list[list[int]]:
        step = self.classes_per_increment
        return [
            self.class_order[i : i + step]
            for i in range(0, len(self.class_order), step)
        ]


def make_schedule(
    class_ids, classes_per_increment: int, seed: int, shots: int | None = None
) -> IncrementSchedule:
    """Seeded random class order over the given IDs."""
    rng = np.random.default_rng(seed)
    order = [int(c) for c in rng.permutation(sorted(int(c) for c in class_ids))]
    return IncrementSchedule(order, classes_per_increment, shots)


@dataclass
class ExperimentConfig:
    method: Method
    classes_per_increment: int
    train_path: str | None = None
    test_path: str | None = None
    data_format: str = "binary"
    shots: int | None = None
    distance_threshold: float = 20.0
    budget: int | None = None
    budget_policy: str = "reduce"
    pooled_merge: bool = False  # fold between-centroid scatter into merges
    cov: CovarianceMode = CovarianceMode.FULL
    fsil: bool = False
    fsil_per_class: int = 40
    seeds: tuple[int, ...] = (0,)
    base_epochs: int = 25
    epoch_step: int = 2
    replay_lr: float = 0.01
    replay_batch: int = 64
    flb_lr: float = 0.001
    flb_batch: int = 8
    momentum: float = 0.9
    top_n: int = 1
    epsilon: float = 1e-8

    def __post_init__(self):
        if isinstance(self.method, str):
            self.method = Method(self.method)
        if isinstance(self.cov, str):
            self.cov = CovarianceMode("diag" if self.cov == "diag" else self.cov)
        self.seeds = tuple(int(s) for s in self.seeds)
        if self.budget_policy not in ("reduce", "remove"):
            raise ValueError(f"unknown budget policy {self.budget_policy!r}")
        if self.fsil and self.shots is None:
            raise ValueError("few-shot mode requires a shot count")

    @property
    def cov_mode(self) -> CovarianceMode:
        if self.method is Method.CBCL_PR_DIAG:
            return CovarianceMode.DIAGONAL
        return self.cov

    def epochs_for(self, increment: int) -> int:
        return self.base_epochs + self.epoch_step * increment

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "classes_per_increment": self.classes_per_increment,
            "shots": self.shots,
            "distance_threshold": self.distance_threshold,
            "budget": self.budget,
            "budget_policy": self.budget_policy,
            "pooled_merge": self.pooled_merge,
            "cov": self.cov_mode.value,
            "fsil": self.fsil,
            "fsil_per_class": self.fsil_per_class,
            "seeds": list(self.seeds),
            "base_epochs": self.base_epochs,
            "epoch_step": self.epoch_step,
            "replay_lr": self.replay_lr,
            "replay_batch": self.replay_batch,
            "flb_lr": self.flb_lr,
            "flb_batch": self.flb_batch,
            "momentum": self.momentum,
            "top_n": self.top_n,
            "epsilon": self.epsilon,
        }


class TrainingSource:
    """Per-class training vectors with the shot cap applied.

    Every read is logged as (increment, class_id); the protocol requires
    that no method except the batch baseline touches a class's real
    vectors after the increment that introduced it.
    """

    def __init__(self, by_class: dict[int, np.ndarray], shots: int | None):
        self._by_class = by_class
        self.shots = shots
        self.increment = -1
        self.access_log: list[tuple[int, int]] = []

    def begin_increment(self, increment: int) -> None:
        self.increment = increment

    def vectors_for(self, class_id: int) -> np.ndarray:
        self.access_log.append((self.increment, class_id))
        vecs = self._by_class[class_id]
        return vecs if self.shots is None else vecs[: self.shots]


@dataclass
class IncrementRecord:
    seed: int
    increment: int
    new_classes: list[int]
    n_classes_seen: int
    accuracy: float
    per_class_accuracy: dict[int, float]
    clusters_total: int | None
    memory_bytes: int | None
    train_real: int
    train_pseudo: int
    final_loss: float | None
    timings: dict[str, float] = field(default_factory=dict)


@dataclass
class SeedReport:
    seed: int
    increments: list[IncrementRecord]

    @property
    def average_incremental_accuracy(self) -> float:
        return float(np.mean([r.accuracy for r in self.increments]))

    @property
    def final_accuracy(self) -> float:
        return self.increments[-1].accuracy


@dataclass
class RunReport:
    config: dict
    seeds: list[SeedReport]

    @property
    def per_seed_average(self) -> list[float]:
        return [s.average_incremental_accuracy for s in self.seeds]

    @property
    def mean_average_accuracy(self) -> float:
        return float(np.mean(self.per_seed_average))

    @property
    def std_average_accuracy(self) -> float:
        return float(np.std(self.per_seed_average))

    @property
    def mean_final_accuracy(self) -> float:
        return float(np.mean([s.final_accuracy for s in self.seeds]))


def _label_lut(label_map: dict[int, int]) -> np.ndarray:
    lut = np.full(max(label_map) + 1, -1, dtype=np.int64)
    for cid, row in label_map.items():
        lut[cid] = row
    return lut


def _dataset_from(parts: dict[int, np.ndarray]) -> FeatureDataset:
    labels = np.concatenate(
        [np.full(len(v), c, dtype=np.int64) for c, v in parts.items()]
    )
    return FeatureDataset(labels, np.vstack(list(parts.values())))


def _accuracy_by_class(predicted, labels) -> tuple[float, dict[int, float]]:
    correct = predicted == labels
    per_class = {
        int(c): float(correct[labels == c].mean()) for c in np.unique(labels)
    }
    return float(correct.mean()), per_class


def _run_seed(
    config: ExperimentConfig,
    source: TrainingSource,
    test: FeatureDataset,
    class_ids: list[int],
    seed: int,
) -> SeedReport:
    method = config.method
    schedule = make_schedule(class_ids, config.classes_per_increment, seed, config.shots)
    mode = config.cov_mode
    store = MemoryStore(config.budget, mode) if method in STORE_METHODS else None
    clf: LinearClassifier | None = None
    label_map: dict[int, int] = {}
    records = []

    for inc, new_classes in enumerate(schedule.increments()):
        source.begin_increment(inc)
        timings: dict[str, float] = {}
        new_data = {c: source.vectors_for(c) for c in new_classes}
        dim = next(iter(new_data.values())).shape[1]

        t0 = time.perf_counter()
        if store is not None:
            for c in new_classes:
                vecs = new_data[c]
                if method in KMEANS_BACKED:
                    # match the cluster budget the threshold pass would use
                    reference, _ = cluster_class(vecs, config.distance_threshold, mode)
                    clusters = kmeans_class(
                        vecs, len(reference), derive_seed(seed, c), mode
                    )
                else:
                    clusters, _ = cluster_class(vecs, config.distance_threshold, mode)
                absorb(
                    store,
                    c,
                    clusters,
                    len(vecs),
                    seed=derive_seed(seed, inc),
                    policy=config.budget_policy,
                    pooled=config.pooled_merge,
                )
        timings["clustering"] = time.perf_counter() - t0

        for c in new_classes:
            label_map[c] = len(label_map)
        seen = list(label_map)

        n_real = 0
        n_pseudo = 0
        final_loss = None
        timings["rehearsal"] = 0.0
        timings["training"] = 0.0

        if method in REPLAY_METHODS:
            t0 = time.perf_counter()
            plan = RehearsalPlan(
                RehearsalMode.FSIL if config.fsil else RehearsalMode.STANDARD,
                config.fsil_per_class,
                derive_seed(seed, inc, 0),
            )
            if config.fsil:
                pseudo = generate(store, plan, seen)
                mix = build_training_mix(pseudo, None, plan)
            else:
                old = [c for c in seen if c not in new_classes]
                pseudo = (
                    generate(store, plan, old) if old else PseudoExemplarSet({})
                )
                real_new = _dataset_from(new_data)
                n_real = len(real_new)
                mix = build_training_mix(pseudo, real_new, plan)
            n_pseudo = pseudo.total()
            timings["rehearsal"] = time.perf_counter() - t0

            t0 = time.perf_counter()
            mapped = FeatureDataset(_label_lut(label_map)[mix.labels], mix.vectors)
            clf = LinearClassifier.initialize(dim, len(seen), derive_seed(seed, inc, 1))
            result = train(
                clf,
                mapped,
                TrainConfig(
                    config.epochs_for(inc),
                    config.replay_lr,
                    config.replay_batch,
                    config.momentum,
                    derive_seed(seed, inc, 2),
                ),
            )
            final_loss = result.final_loss
            timings["training"] = time.perf_counter() - t0
        elif method is Method.FT:
            t0 = time.perf_counter()
            if clf is None:
                clf = LinearClassifier.initialize(
                    dim, len(seen), derive_seed(seed, inc, 1)
                )
            else:
                grow(clf, len(seen))
            ds = _dataset_from(new_data)
            n_real = len(ds)
            mapped = FeatureDataset(_label_lut(label_map)[ds.labels], ds.vectors)
            result = train(
                clf,
                mapped,
                TrainConfig(
                    config.epochs_for(inc),
                    config.replay_lr,
                    config.replay_batch,
                    config.momentum,
                    derive_seed(seed, inc, 2),
                ),
            )
            final_loss = result.final_loss
            timings["training"] = time.perf_counter() - t0
        elif method is Method.FLB:
            t0 = time.perf_counter()
            # the batch baseline alone may re-read old classes' real data
            all_data = {c: source.vectors_for(c) for c in seen}
            ds = _dataset_from(all_data)
            n_real = len(ds)
            mapped = FeatureDataset(_label_lut(label_map)[ds.labels], ds.vectors)
            clf = LinearClassifier.initialize(dim, len(seen), derive_seed(seed, inc, 1))
            result = train(
                clf,
                mapped,
                TrainConfig(
                    config.epochs_for(inc),
                    config.flb_lr,
                    config.flb_batch,
                    config.momentum,
                    derive_seed(seed, inc, 2),
                ),
            )
            final_loss = result.final_loss
            timings["training"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        mask = np.isin(test.labels, seen)
        test_sub = FeatureDataset(test.labels[mask], test.vectors[mask])
        if method in VOTING_METHODS:
            index = CentroidIndex.from_store(store)
            vconf = VotingConfig(config.top_n, config.epsilon)
            predicted = np.array(
                [index.vote(v, vconf) for v in test_sub.vectors], dtype=np.int64
            )
            accuracy, per_class = _accuracy_by_class(predicted, test_sub.labels)
        elif method is Method.NCM:
            predicted = predict_ncm_batch(store, test_sub.vectors)
            accuracy, per_class = _accuracy_by_class(predicted, test_sub.labels)
        else:
            lut = _label_lut(label_map)
            ev = evaluate(
                clf, FeatureDataset(lut[test_sub.labels], test_sub.vectors)
            )
            inverse = {row: cid for cid, row in label_map.items()}
            accuracy = ev.accuracy
            per_class = {inverse[row]: acc for row, acc in ev.per_class.items()}
        timings["prediction"] = time.perf_counter() - t0

        records.append(
            IncrementRecord(
                seed=seed,
                increment=inc,
                new_classes=[int(c) for c in new_classes],
                n_classes_seen=len(seen),
                accuracy=accuracy,
                per_class_accuracy={int(k): v for k, v in sorted(per_class.items())},
                clusters_total=store.total_clusters if store else None,
                memory_bytes=memory_bytes(store) if store else None,
                train_real=n_real,
                train_pseudo=n_pseudo,
                final_loss=final_loss,
                timings=timings,
            )
        )
    return SeedReport(seed, records)


def run_experiment(
    config: ExperimentConfig,
    train_data: FeatureDataset | None = None,
    test_data: FeatureDataset | None = None,
    source_factory=TrainingSource,
) -> RunReport:
    """Run the configured experiment over all seeds.

    Datasets may be passed directly or read from the config paths.
    `source_factory` builds the per-seed training source; tests inject a
    logging subclass here to assert the data-access protocol.
    """
    if train_data is None:
        if config.train_path is None:
            raise ValueError("no training data: set train_path or pass train_data")
        train_data = read_dataset(config.train_path, config.data_format)
    if test_data is None:
        if config.test_path is None:
            raise ValueError("no test data: set test_path or pass test_data")
        test_data = read_dataset(config.test_path, config.data_format)

    by_class = split_by_class(train_data)
    class_ids = sorted(by_class)
    seed_reports = []
    for seed in config.seeds:
        source = source_factory(by_class, config.shots)
        seed_reports.append(_run_seed(config, source, test_data, class_ids, seed))
    return RunReport(config.to_dict(), seed_reports)


# ---------------------------------------------------------------------------
# report serialization


def _jsonl(records) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def report_records(report: RunReport) -> list[dict]:
    """Deterministic JSON-lines payload: one record per (seed, increment)
    plus a trailing summary record."""
    out = []
    for seed_report in report.seeds:
        for rec in seed_report.increments:
            out.append(
                {
                    "record": "increment",
                    "seed": rec.seed,
                    "increment": rec.increment,
                    "new_classes": rec.new_classes,
                    "n_classes_seen": rec.n_classes_seen,
                    "accuracy": rec.accuracy,
                    "per_class_accuracy": {
                        str(k): v for k, v in rec.per_class_accuracy.items()
                    },
                    "clusters_total": rec.clusters_total,
                    "memory_bytes": rec.memory_bytes,
                    "train_real": rec.train_real,
                    "train_pseudo": rec.train_pseudo,
                    "final_loss": rec.final_loss,
                }
            )
    out.append(
        {
            "record": "summary",
            "config": report.config,
            "per_seed_average": report.per_seed_average,
            "average_incremental_accuracy_mean": report.mean_average_accuracy,
            "average_incremental_accuracy_std": report.std_average_accuracy,
            "final_accuracy_mean": report.mean_final_accuracy,
        }
    )
    return out


def write_report(report: RunReport, path) -> None:
    """Write the deterministic report to `path` and wall-clock phase
    timings to the `<path>.timings` sidecar."""
    path = Path(path)
    path.write_text(_jsonl(report_records(report)), encoding="ascii")
    timing_records = [
        {
            "record": "timing",
            "seed": rec.seed,
            "increment": rec.increment,
            "seconds": rec.timings,
        }
        for seed_report in report.seeds
        for rec in seed_report.increments
    ]
    Path(f"{path}.timings").write_text(_jsonl(timing_records), encoding="ascii")


# ---------------------------------------------------------------------------
# budget sweep


@dataclass
class BudgetPoint:
    budget: int
    reduced: RunReport
    removed: RunReport


def run_budget_sweep(
    config: ExperimentConfig,
    budgets: list[int],
    train_data: FeatureDataset | None = None,
    test_data: FeatureDataset | None = None,
) -> list[BudgetPoint]:
    """Run the experiment at each budget under both shrink policies."""
    if sorted(budgets) != list(budgets):
        raise ValueError("budgets must be sorted ascending")
    points = []
    for budget in budgets:
        reports = {}
        for policy in ("reduce", "remove"):
            cfg = ExperimentConfig(
                **{
                    **config.to_dict(),
                    "budget": budget,
                    "budget_policy": policy,
                    "seeds": config.seeds,
                }
            )
            cfg.train_path = config.train_path
            cfg.test_path = config.test_path
            cfg.data_format = config.data_format
            reports[policy] = run_experiment(cfg, train_data, test_data)
        points.append(BudgetPoint(budget, reports["reduce"], reports["remove"]))
    return points


def write_sweep(points: list[BudgetPoint], path) -> None:
    records = []
    for pt in points:
        for policy, rep in (("reduce", pt.reduced), ("remove", pt.removed)):
            records.append(
                {
                    "record": "budget_point",
                    "budget": pt.budget,
                    "policy": policy,
                    "per_seed_average": rep.per_seed_average,
                    "average_incremental_accuracy_mean": rep.mean_average_accuracy,
                    "average_incremental_accuracy_std": rep.std_average_accuracy,
                }
            )
    Path(path).write_text(_jsonl(records), encoding="ascii")


# ---------------------------------------------------------------------------
# prediction-latency benchmark


@dataclass
class TimingBench:
    sizes: list[int]
    voting_ns: dict[int, np.ndarray]  # per-query latencies by store size
    linear_ns: dict[int, np.ndarray]

    def summary(self) -> list[dict]:
        out = []
        for size in self.sizes:
            for name, samples in (
                ("voting", self.voting_ns[size]),
                ("linear", self.linear_ns[size]),
            ):
                out.append(
                    {
                        "record": "timing",
                        "predictor": name,
                        "n_centroids": size,
                        "median_ms": float(np.median(samples)) / 1e6,
                        "p95_ms": float(np.percentile(samples, 95)) / 1e6,
                    }
                )
        return out


def _bench_store(n_centroids: int, dim: int, n_classes: int, rng) -> MemoryStore:
    store = MemoryStore(mode=CovarianceMode.DIAGONAL)
    for cid in range(n_classes):
        take = n_centroids // n_classes + (1 if cid < n_centroids % n_classes else 0)
        clusters = [
            Cluster(rng.normal(0.0, 10.0, dim), int(rng.integers(1, 20)), np.ones(dim))
            for _ in range(take)
        ]
        store.classes[cid] = ClassMemory(cid, clusters, sum(c.count for c in clusters))
    return store


def run_timing_bench(
    sizes: list[int],
    queries: int = 100,
    dim: int = 512,
    n_classes: int = 10,
    top_n: int = 1,
    seed: int = 0,
) -> TimingBench:
    """Median/p95 per-query latency of voting vs. the linear classifier at
    each store size, with raw samples kept for slope analysis."""
    rng = np.random.default_rng(seed)
    clf = LinearClassifier.initialize(dim, n_classes, seed)
    vconf = VotingConfig(top_n=top_n)
    bench = TimingBench(list(sizes), {}, {})
    for size in sizes:
        store = _bench_store(size, dim, n_classes, rng)
        index = CentroidIndex.from_store(store)
        qs = rng.normal(0.0, 10.0, (queries, dim))
        for q in qs[: min(5, queries)]:  # warmup
            index.vote(q, vconf)
            logits_argmax(clf, q)
        voting = np.empty(queries)
        linear = np.empty(queries)
        for i, q in enumerate(qs):
            t0 = time.perf_counter_ns()
            index.vote(q, vconf)
            voting[i] = time.perf_counter_ns() - t0
            t0 = time.perf_counter_ns()
            logits_argmax(clf, q)
            linear[i] = time.perf_counter_ns() - t0
        bench.voting_ns[size] = voting
        bench.linear_ns[size] = linear
    return bench


def logits_argmax(clf: LinearClassifier, q: np.ndarray) -> int:
    return int(np.argmax(q @ clf.weights.T + clf.bias))


def latency_slope(samples_ns: dict[int, np.ndarray]):
    """Least-squares slope (ns per centroid) and p-value of latency vs
    store size over all raw samples."""
    from scipy import stats

    xs = np.concatenate(
        [np.full(len(v), size, dtype=np.float64) for size, v in samples_ns.items()]
    )
    ys = np.concatenate([v for v in samples_ns.values()])
    fit = stats.linregress(xs, ys)
    return float(fit.slope), float(fit.pvalue)


def write_timing_bench(bench: TimingBench, path) -> None:
    Path(path).write_text(_jsonl(bench.summary()), encoding="ascii")


# ---------------------------------------------------------------------------
# pseudo-exemplar demo (2-D point clouds)


@dataclass
class DemoResult:
    original_path: Path
    pseudo_path: Path
    metrics_path: Path
    metrics: dict


def run_pseudo_demo(
    dataset: FeatureDataset,
    threshold: float,
    out_dir,
    shots: int | None = None,
    per_class: int | None = None,
    seed: int = 0,
) -> DemoResult:
    """Write original and replayed 2-D point clouds plus per-class moment
    discrepancies.  `per_class` switches to fixed-size few-shot replay;
    otherwise each class replays its own record count.  Deterministic:
    identical inputs produce byte-identical files."""
    if dataset.dim != 2:
        raise ValueError(f"demo requires 2-D data, got dim {dataset.dim}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    used: dict[int, np.ndarray] = {}
    store = MemoryStore(mode=CovarianceMode.FULL)
    for cid, vecs in split_by_class(dataset).items():
        if shots is not None:
            vecs = vecs[:shots]
        used[cid] = vecs
        clusters, _ = cluster_class(vecs, threshold, CovarianceMode.FULL)
        absorb(store, cid, clusters, len(vecs))

    if per_class is not None:
        plan = RehearsalPlan(RehearsalMode.FSIL, per_class, seed)
    else:
        plan = RehearsalPlan(RehearsalMode.STANDARD, seed=seed)
    pseudo = generate(store, plan, list(used))

    metrics = {}
    for cid in sorted(used):
        orig, gen = used[cid].astype(np.float64), pseudo.by_class[cid]
        mean_o, mean_p = orig.mean(axis=0), gen.mean(axis=0)
        cov_o = np.cov(orig, rowvar=False)
        cov_p = np.cov(gen, rowvar=False)
        metrics[str(cid)] = {
            "mean_rel_err": float(
                np.linalg.norm(mean_p - mean_o) / np.linalg.norm(mean_o)
            ),
            "cov_rel_frobenius": float(
                np.linalg.norm(cov_p - cov_o) / np.linalg.norm(cov_o)
            ),
            "n_original": len(orig),
            "n_pseudo": len(gen),
            "n_clusters": store.classes[cid].n_clusters,
        }

    original_path = out_dir / "original.csv"
    pseudo_path = out_dir / "pseudo.csv"
    metrics_path = out_dir / "metrics.json"
    write_dataset(_dataset_from(used), original_path, "csv")
    write_dataset(_dataset_from(pseudo.by_class), pseudo_path, "csv")
    metrics_path.write_text(
        json.dumps(metrics, sort_keys=True, indent=2) + "\n", encoding="ascii"
    )
    return DemoResult(original_path, pseudo_path, metrics_path, metrics)
