"""Seeded pseudo-exemplar generation from stored cluster Gaussians.

Each stored (centroid, covariance, count) triple defines a multivariate
Gaussian.  Replay draws from N(centroid, covariance + lambda*I) with a small
ridge lambda = 1e-6 * mean(diagonal), which handles the rank-deficient
covariances that few-shot clusters produce; count-1 clusters have zero
covariance and therefore lambda = 0, replaying exact centroid copies.

Sampling uses the Philox counter-based bit generator with a per-(class,
cluster) sub-seed, so output is independent of iteration order and
reproducible bit-for-bit within one build of this library.

Two modes:

* standard - cluster i of class y contributes exactly count_i vectors, so
  each class replays its original training-set size;
* few-shot - every class contributes a fixed number of vectors (default 40),
  split across clusters proportionally to their counts by largest-remainder
  rounding; used when real vectors are too scarce to train on directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .clustering import Cluster
from .features import FeatureDataset
from .memory import MemoryStore

_RIDGE_SCALE = 1e-6
_MIX_STREAM = 0x4D495853  # stream tag for the training-mix shuffle


class RehearsalMode(Enum):
    STANDARD = "standard"
    FSIL = "fsil"


@dataclass(frozen=True)
class RehearsalPlan:
    mode: RehearsalMode = RehearsalMode.STANDARD
    fsil_per_class: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.fsil_per_class < 1:
            raise ValueError(f"fsil_per_class {self.fsil_per_class} < 1")


@dataclass
class PseudoExemplarSet:
    """Generated vectors grouped by class label."""

    by_class: dict[int, np.ndarray]

    def total(self) -> int:
        return sum(len(v) for v in self.by_class.values())


_MASK64 = (1 << 64) - 1


def _subseed(seed: int, class_id: int, cluster_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed & _MASK64, class_id, cluster_index])


def _sqrt_factor(cluster: Cluster) -> np.ndarray:
    """Matrix F with F @ F.T = covariance + ridge, or the per-coordinate
    standard deviations in diagonal mode."""
    if cluster.is_diagonal:
        var = cluster.covariance
        if np.any(var < 0):
            raise ValueError("negative variance; covariance is not PSD")
        ridge = _RIDGE_SCALE * var.mean()
        return np.sqrt(var + ridge)
    cov = cluster.covariance
    ridge = _RIDGE_SCALE * np.diag(cov).mean()
    reg = cov + ridge * np.eye(cluster.dim)
    try:
        return np.linalg.cholesky(reg)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(reg)
        floor = -1e-6 * max(1.0, float(w.max()))
        if w.min() < floor:
            raise ValueError(
                f"covariance is not positive semidefinite after "
                f"regularization (min eigenvalue {w.min():.3g})"
            ) from None
        return v * np.sqrt(np.clip(w, 0.0, None))


def sample_cluster(cluster: Cluster, n: int, seed) -> np.ndarray:
    """Draw n vectors from the cluster's regularized Gaussian.

    `seed` may be an int or a SeedSequence.  Deterministic given the seed;
    a zero-covariance cluster yields n copies of its centroid.
    """
    if n < 1:
        raise ValueError(f"n {n} < 1")
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal((n, cluster.dim))
    factor = _sqrt_factor(cluster)
    if cluster.is_diagonal:
        return cluster.centroid + z * factor
    return cluster.centroid + z @ factor.T


def fsil_allocation(counts, total: int) -> np.ndarray:
    """Split `total` draws across clusters proportionally to their counts
    (largest-remainder rounding; remainder ties go to the lowest index)."""
    counts = np.asarray(counts, dtype=np.float64)
    quota = total * counts / counts.sum()
    alloc = np.floor(quota).astype(np.int64)
    remainder = quota - alloc
    short = total - int(alloc.sum())
    for i in np.argsort(-remainder, kind="stable")[:short]:
        alloc[i] += 1
    return alloc


def generate(
    store: MemoryStore, plan: RehearsalPlan, classes
) -> PseudoExemplarSet:
    """Generate pseudo-exemplars for the requested classes.

    Standard mode replays count_i vectors per cluster; few-shot mode
    replays plan.fsil_per_class vectors per class.  Per-cluster sub-seeding
    makes the output independent of the class iteration order.
    """
    out: dict[int, np.ndarray] = {}
    for cid in sorted(int(c) for c in classes):
        if cid not in store.classes:
            raise KeyError(f"class {cid} not in store")
        mem = store.classes[cid]
        if plan.mode is RehearsalMode.FSIL:
            per_cluster = fsil_allocation(mem.counts(), plan.fsil_per_class)
        else:
            per_cluster = mem.counts()
        parts = [
            sample_cluster(cluster, int(n), _subseed(plan.seed, cid, i))
            for i, (cluster, n) in enumerate(zip(mem.clusters, per_cluster))
            if n > 0
        ]
        out[cid] = np.vstack(parts)
    return PseudoExemplarSet(out)


def build_training_mix(
    pseudo: PseudoExemplarSet,
    real_new: FeatureDataset | None,
    plan: RehearsalPlan,
) -> FeatureDataset:
    """Combine pseudo-exemplars with the new classes' real vectors into one
    seeded-shuffled training set.

    Standard mode requires real vectors for the new classes; few-shot mode
    requires none (new classes are already replayed as pseudo-exemplars).
    """
    if plan.mode is RehearsalMode.STANDARD and (real_new is None or len(real_new) == 0):
        raise ValueError("standard mode requires real vectors for the new classes")
    if plan.mode is RehearsalMode.FSIL and real_new is not None:
        raise ValueError("few-shot mode trains on pseudo-exemplars only")

    labels: list[np.ndarray] = []
    vectors: list[np.ndarray] = []
    for cid in sorted(pseudo.by_class):
        vecs = pseudo.by_class[cid]
        labels.append(np.full(len(vecs), cid, dtype=np.int64))
        vectors.append(vecs)
    if real_new is not None:
        labels.append(real_new.labels)
        vectors.append(real_new.vectors)

    all_labels = np.concatenate(labels)
    all_vectors = np.vstack([np.asarray(v, dtype=np.float32) for v in vectors])
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([plan.seed & _MASK64, _MIX_STREAM]))
    )
    perm = rng.permutation(len(all_labels))
    return FeatureDataset(all_labels[perm], all_vectors[perm])
