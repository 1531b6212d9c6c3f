"""Per-class cluster memory with a global budget on stored clusters.

A :class:`MemoryStore` maps class IDs to their cluster sets.  When absorbing
a new class pushes the total cluster count past the budget, the store is
reduced: every class's cluster count is scaled down proportionally
(floor(n * (1 - K_r / K_t)), clamped to at least one cluster per class) and
each shrunken class is re-clustered by k-means over its centroids, merging
cluster groups with count-weighted statistics.  :func:`remove_only` applies
the same targets by dropping clusters instead, for comparison.

Snapshots serialize to a single file (magic ``CBMS``) using the same
little-endian primitive encodings as the feature file format.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import struct

import numpy as np

from .clustering import Cluster, CovarianceMode, _lloyd

MAGIC_STORE = b"CBMS"
STORE_VERSION = 1
_STORE_HEADER = struct.Struct("<4sIIIQI")  # magic, version, dim, mode, budget, classes
_CLASS_HEADER = struct.Struct("<IQI")  # class_id, original_count, n_clusters


@dataclass
class ClassMemory:
    """All clusters retained for one class.

    `original_count` is the number of training vectors ever absorbed for the
    class; merging preserves the cluster-count sum, removal shrinks it.
    """

    class_id: int
    clusters: list[Cluster]
    original_count: int

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def counts(self) -> np.ndarray:
        return np.array([c.count for c in self.clusters], dtype=np.int64)


@dataclass
class MemoryStore:
    """Cluster memory for all classes seen so far.

    `budget` is the maximum total cluster count (None = unlimited) and is
    re-established by :func:`absorb` after every insertion.
    """

    budget: int | None = None
    mode: CovarianceMode = CovarianceMode.FULL
    classes: dict[int, ClassMemory] = field(default_factory=dict)

    @property
    def total_clusters(self) -> int:
        return sum(m.n_clusters for m in self.classes.values())

    @property
    def dim(self) -> int:
        if not self.classes:
            raise ValueError("empty store has no dimension")
        first = next(iter(self.classes.values()))
        return first.clusters[0].dim

    def class_ids(self) -> list[int]:
        return sorted(self.classes)


def _check_mode(clusters: list[Cluster], mode: CovarianceMode) -> None:
    for c in clusters:
        if c.is_diagonal != (mode is CovarianceMode.DIAGONAL):
            raise ValueError("cluster covariance does not match store mode")


def absorb(
    store: MemoryStore,
    class_id: int,
    clusters: list[Cluster],
    n_vectors: int,
    seed: int = 0,
    policy: str = "reduce",
    pooled: bool = False,
) -> MemoryStore:
    """Register a new class; runs budget reduction before returning.

    Each class may be absorbed once.  `policy` selects how an exceeded
    budget is resolved: "reduce" merges via :func:`reduce` (with `pooled`
    forwarded), "remove" drops via :func:`remove_only`.
    """
    if class_id in store.classes:
        raise ValueError(f"class {class_id} already absorbed")
    if not clusters:
        raise ValueError("cannot absorb an empty cluster list")
    _check_mode(clusters, store.mode)
    store.classes[class_id] = ClassMemory(class_id, list(clusters), n_vectors)
    if store.budget is not None and store.total_clusters > store.budget:
        if store.budget < len(store.classes):
            raise ValueError(
                f"budget {store.budget} cannot hold one cluster for each of "
                f"{len(store.classes)} classes"
            )
        excess = store.total_clusters - store.budget
        if policy == "reduce":
            reduce(store, excess, seed=seed, pooled=pooled)
        elif policy == "remove":
            remove_only(store, excess)
        else:
            raise ValueError(f"unknown budget policy {policy!r}")
    return store


def _reduction_targets(store: MemoryStore, k_r: int) -> dict[int, int]:
    """Per-class cluster targets: floor(n * (1 - k_r/k_t)), clamped to 1.

    Flooring keeps the total at or below k_t - k_r; any slack introduced by
    the clamp is taken back from the classes with the most clusters,
    largest first.
    """
    k_t = store.total_clusters
    frac = 1.0 - k_r / k_t
    targets = {
        cid: max(1, int(np.floor(mem.n_clusters * frac)))
        for cid, mem in store.classes.items()
    }
    allowed = k_t - k_r
    while sum(targets.values()) > allowed:
        # largest target first; ties broken by class id for determinism
        cid = max(targets, key=lambda c: (targets[c], -c))
        if targets[cid] <= 1:
            break  # cannot trim below one cluster per class
        targets[cid] -= 1
    return targets


def _merge_group(members: list[Cluster], pooled: bool) -> Cluster:
    counts = np.array([c.count for c in members], dtype=np.float64)
    weights = counts / counts.sum()
    centroids = np.stack([c.centroid for c in members])
    merged_centroid = weights @ centroids
    covs = np.stack([c.covariance for c in members])
    merged_cov = np.tensordot(weights, covs, axes=1)
    if pooled:
        # add the count-weighted between-centroid scatter
        dev = centroids - merged_centroid
        if members[0].is_diagonal:
            merged_cov = merged_cov + weights @ (dev * dev)
        else:
            merged_cov = merged_cov + np.einsum("k,ki,kj->ij", weights, dev, dev)
    return Cluster(merged_centroid, int(counts.sum()), merged_cov)


def reduce(
    store: MemoryStore, k_r: int, seed: int = 0, pooled: bool = False
) -> MemoryStore:
    """Shrink the store by `k_r` clusters, merging instead of discarding.

    Each class is re-clustered to its proportional target by k-means over
    its centroids; merged clusters carry the count-weighted mean centroid,
    the summed count, and the count-weighted average of member covariances
    (`pooled=True` additionally folds in the between-centroid scatter).
    """
    if k_r == 0:
        return store
    k_t = store.total_clusters
    if k_r >= k_t:
        raise ValueError(f"cannot reduce by {k_r} of {k_t} clusters")
    targets = _reduction_targets(store, k_r)
    for cid, mem in store.classes.items():
        target = targets[cid]
        if target >= mem.n_clusters:
            continue
        centroids = np.stack([c.centroid for c in mem.clusters])
        sub_seed = int(np.random.SeedSequence([seed, cid]).generate_state(1)[0])
        _, groups = _lloyd(centroids, target, np.random.default_rng(sub_seed))
        mem.clusters = [
            _merge_group([mem.clusters[i] for i in np.flatnonzero(groups == g)], pooled)
            for g in range(target)
        ]
    return store


def remove_only(store: MemoryStore, k_r: int) -> MemoryStore:
    """Shrink by `k_r` clusters by dropping, smallest count first."""
    if k_r == 0:
        return store
    k_t = store.total_clusters
    if k_r >= k_t:
        raise ValueError(f"cannot remove {k_r} of {k_t} clusters")
    targets = _reduction_targets(store, k_r)
    for cid, mem in store.classes.items():
        target = targets[cid]
        if target >= mem.n_clusters:
            continue
        drop = np.argsort(mem.counts(), kind="stable")[: mem.n_clusters - target]
        keep = sorted(set(range(mem.n_clusters)) - set(int(i) for i in drop))
        mem.clusters = [mem.clusters[i] for i in keep]
    return store


def memory_bytes(store: MemoryStore) -> int:
    """Billed size of the stored clusters: 4*dim centroid + 4 count +
    covariance payload (4*dim diagonal, 4*dim*dim full) per cluster."""
    total = 0
    for mem in store.classes.values():
        for c in mem.clusters:
            dim = c.dim
            payload = 4 * dim if c.is_diagonal else 4 * dim * dim
            total += 4 * dim + 4 + payload
    return total


def save_store(store: MemoryStore, path) -> None:
    """Serialize to the CBMS snapshot format (values stored as binary32)."""
    if not store.classes:
        raise ValueError("refusing to snapshot an empty store")
    dim = store.dim
    mode_code = 1 if store.mode is CovarianceMode.DIAGONAL else 0
    budget = 0 if store.budget is None else store.budget
    parts = [
        _STORE_HEADER.pack(
            MAGIC_STORE, STORE_VERSION, dim, mode_code, budget, len(store.classes)
        )
    ]
    for cid in store.class_ids():
        mem = store.classes[cid]
        parts.append(_CLASS_HEADER.pack(cid, mem.original_count, mem.n_clusters))
        for c in mem.clusters:
            parts.append(struct.pack("<Q", c.count))
            parts.append(c.centroid.astype("<f4").tobytes())
            parts.append(c.covariance.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_store(path) -> MemoryStore:
    raw = Path(path).read_bytes()
    magic, version, dim, mode_code, budget, n_classes = _STORE_HEADER.unpack_from(raw)
    if magic != MAGIC_STORE:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != STORE_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    mode = CovarianceMode.DIAGONAL if mode_code else CovarianceMode.FULL
    cov_len = dim if mode is CovarianceMode.DIAGONAL else dim * dim
    store = MemoryStore(budget=budget or None, mode=mode)
    offset = _STORE_HEADER.size
    for _ in range(n_classes):
        cid, original_count, n_clusters = _CLASS_HEADER.unpack_from(raw, offset)
        offset += _CLASS_HEADER.size
        clusters = []
        for _ in range(n_clusters):
            (count,) = struct.unpack_from("<Q", raw, offset)
            offset += 8
            centroid = np.frombuffer(raw, "<f4", dim, offset).astype(np.float64)
            offset += 4 * dim
            cov = np.frombuffer(raw, "<f4", cov_len, offset).astype(np.float64)
            offset += 4 * cov_len
            if mode is CovarianceMode.FULL:
                cov = cov.reshape(dim, dim)
            clusters.append(Cluster(centroid, count, cov))
        store.classes[cid] = ClassMemory(cid, clusters, original_count)
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes")
    return store
