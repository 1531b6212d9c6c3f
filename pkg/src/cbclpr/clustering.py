"""Online threshold clustering of one class's feature vectors.

The main entry point, :func:`cluster_class`, makes a single ordered pass over
the vectors of one class.  Each vector either folds into the nearest existing
cluster (when its Euclidean distance to that cluster's centroid is strictly
below the threshold) or opens a new cluster seeded at the vector.  Centroids
are updated online as running means, so the result depends on input order;
callers must treat order as part of the data.

A deterministic Lloyd k-means (:func:`kmeans_class`) is provided as an
alternative backend producing clusters with the same covariance conventions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class CovarianceMode(Enum):
    """Covariance storage mode, fixed per experiment."""

    FULL = "full"
    DIAGONAL = "diag"


@dataclass
class Cluster:
    """A centroid with the count and covariance of its absorbed vectors.

    `covariance` is a (dim, dim) symmetric matrix in FULL mode or a
    length-dim vector of per-coordinate variances in DIAGONAL mode.
    Sample covariance uses denominator (count - 1); a count-1 cluster has
    zero covariance.
    """

    centroid: np.ndarray
    count: int
    covariance: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.centroid)

    @property
    def is_diagonal(self) -> bool:
        return self.covariance.ndim == 1

    def variance_diagonal(self) -> np.ndarray:
        return self.covariance if self.is_diagonal else np.diag(self.covariance)

    def validate(self) -> None:
        if self.count < 1:
            raise ValueError(f"cluster count {self.count} < 1")
        if self.is_diagonal:
            if np.any(self.covariance < 0):
                raise ValueError("negative variance in diagonal covariance")
        else:
            sym_err = np.abs(self.covariance - self.covariance.T)
            scale = max(1.0, float(np.abs(self.covariance).max()))
            if sym_err.max() > 1e-6 * scale:
                raise ValueError("covariance is not symmetric")
            if np.any(np.diag(self.covariance) < 0):
                raise ValueError("negative diagonal in covariance")
        if self.count == 1 and np.any(self.covariance != 0):
            raise ValueError("count-1 cluster must have zero covariance")


def _as_points(vectors) -> np.ndarray:
    pts = np.asarray(vectors, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("expected a 2-D array of vectors")
    if len(pts) == 0:
        raise ValueError("at least one vector required")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite vector component")
    return pts


def _member_covariance(members: np.ndarray, mode: CovarianceMode) -> np.ndarray:
    dim = members.shape[1]
    n = len(members)
    if n == 1:
        return np.zeros(dim) if mode is CovarianceMode.DIAGONAL else np.zeros((dim, dim))
    dev = members - members.mean(axis=0)
    if mode is CovarianceMode.DIAGONAL:
        return (dev * dev).sum(axis=0) / (n - 1)
    return dev.T @ dev / (n - 1)


def _build_clusters(points, centroids, assignment, mode) -> list[Cluster]:
    clusters = []
    for j in range(len(centroids)):
        members = points[assignment == j]
        clusters.append(
            Cluster(
                centroid=np.array(centroids[j]),
                count=len(members),
                covariance=_member_covariance(members, mode),
            )
        )
    return clusters


def cluster_class(
    vectors,
    threshold: float,
    mode: CovarianceMode = CovarianceMode.FULL,
) -> tuple[list[Cluster], np.ndarray]:
    """Cluster one class's vectors with a single order-sensitive pass.

    Returns the clusters and the per-vector cluster assignment.  The first
    vector seeds cluster 0.  Each later vector folds into the closest
    centroid when its distance is strictly below `threshold` (running-mean
    centroid update, equidistant ties go to the lowest cluster index) and
    opens a new cluster otherwise.  Covariances are computed afterwards from
    the vectors assigned to each cluster.
    """
    if threshold < 0:
        raise ValueError(f"threshold {threshold} < 0")
    pts = _as_points(vectors)
    n, dim = pts.shape

    centroids = np.empty((n, dim))  # at most one cluster per vector
    counts = np.zeros(n, dtype=np.int64)
    assignment = np.zeros(n, dtype=np.int64)
    centroids[0] = pts[0]
    counts[0] = 1
    k = 1
    for i in range(1, n):
        x = pts[i]
        dists = np.linalg.norm(centroids[:k] - x, axis=1)
        j = int(np.argmin(dists))
        if dists[j] < threshold:
            w = counts[j]
            centroids[j] = (w * centroids[j] + x) / (w + 1)
            counts[j] += 1
            assignment[i] = j
        else:
            centroids[k] = x
            counts[k] = 1
            assignment[i] = k
            k += 1

    return _build_clusters(pts, centroids[:k], assignment, mode), assignment


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator):
    """Deterministic Lloyd iteration; returns (centroids, labels)."""
    n = len(points)
    centroids = points[rng.choice(n, size=k, replace=False)].copy()
    sq_norms = (points * points).sum(axis=1)
    labels = None
    for _ in range(100):
        d2 = sq_norms[:, None] - 2.0 * points @ centroids.T + (centroids * centroids).sum(axis=1)
        new_labels = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        counts = np.bincount(labels, minlength=k)
        occupied = counts > 0
        centroids[occupied] = sums[occupied] / counts[occupied, None]
        if not occupied.all():
            # reseed each empty cell at the point farthest from its centroid
            own_d2 = d2[np.arange(n), labels].copy()
            for j in np.flatnonzero(~occupied):
                far = int(np.argmax(own_d2))
                centroids[j] = points[far]
                labels[far] = j
                own_d2[far] = -np.inf
    return centroids, labels


def kmeans_class(
    vectors,
    k: int,
    seed: int,
    mode: CovarianceMode = CovarianceMode.FULL,
) -> list[Cluster]:
    """K-means alternative to :func:`cluster_class`, deterministic given seed.

    Initialization samples k distinct input vectors; iteration is capped at
    100 rounds; empty cells are repaired by reseeding at the point farthest
    from its assigned centroid.  Output clusters carry the cell mean, cell
    size, and member covariance under the same conventions as
    :func:`cluster_class`.
    """
    pts = _as_points(vectors)
    if not 1 <= k <= len(pts):
        raise ValueError(f"k={k} outside [1, {len(pts)}]")
    rng = np.random.default_rng(seed)
    _, labels = _lloyd(pts, k, rng)
    # cell mean recomputed exactly from the final assignment
    centroids = [pts[labels == j].mean(axis=0) for j in range(k)]
    return _build_clusters(pts, centroids, labels, mode)
