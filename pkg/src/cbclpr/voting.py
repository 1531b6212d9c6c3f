"""Centroid-based classifiers that read cluster memory directly.

Weighted voting scores a query against every stored centroid: the top-n
closest centroids each add 1/(distance + epsilon) to their class's score.
The distance pass is O(N) in the number of stored centroids and the top-n
selection is a full O(N log N) sort, so per-query latency grows with memory
size; this is intentional and is what the timing benchmark measures against
the constant-time linear classifier.

The nearest-class-mean baseline collapses each class to the count-weighted
mean of its cluster centroids (equal to the class's training-vector mean)
and predicts the closest one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .memory import MemoryStore


@dataclass(frozen=True)
class VotingConfig:
    top_n: int = 1
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.top_n < 1:
            raise ValueError(f"top_n {self.top_n} < 1")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon {self.epsilon} must be positive")


class CentroidIndex:
    """Flat view of a store's centroids for repeated queries."""

    def __init__(self, centroids, labels, counts, class_ids):
        self.centroids = centroids  # (N, dim)
        self.labels = labels  # (N,) positions into class_ids
        self.counts = counts  # (N,)
        self.class_ids = class_ids  # ascending original class IDs

    @classmethod
    def from_store(cls, store: MemoryStore) -> "CentroidIndex":
        if not store.classes:
            raise ValueError("store is empty")
        class_ids = np.array(store.class_ids(), dtype=np.int64)
        centroids, labels, counts = [], [], []
        for pos, cid in enumerate(class_ids):
            for c in store.classes[int(cid)].clusters:
                centroids.append(c.centroid)
                labels.append(pos)
                counts.append(c.count)
        return cls(
            np.stack(centroids),
            np.array(labels, dtype=np.int64),
            np.array(counts, dtype=np.float64),
            class_ids,
        )

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.centroids.shape[1]:
            raise ValueError(
                f"query dim {x.shape[-1]} != stored dim {self.centroids.shape[1]}"
            )
        return x

    def vote(self, vector, config: VotingConfig) -> int:
        x = self._check_dim(vector)
        dists = np.linalg.norm(self.centroids - x, axis=1)
        order = np.argsort(dists, kind="stable")  # full sort, deliberately
        scores = np.zeros(len(self.class_ids))
        for j in order[: config.top_n]:
            scores[self.labels[j]] += 1.0 / (dists[j] + config.epsilon)
        return int(self.class_ids[np.argmax(scores)])

    def class_means(self) -> np.ndarray:
        means = np.zeros((len(self.class_ids), self.centroids.shape[1]))
        weight = np.zeros(len(self.class_ids))
        np.add.at(means, self.labels, self.counts[:, None] * self.centroids)
        np.add.at(weight, self.labels, self.counts)
        return means / weight[:, None]

    def nearest_mean(self, vector) -> int:
        x = self._check_dim(vector)
        dists = np.linalg.norm(self.class_means() - x, axis=1)
        return int(self.class_ids[np.argmin(dists)])


def predict_voting(
    store: MemoryStore, vector, config: VotingConfig = VotingConfig()
) -> int:
    """Weighted-vote prediction; argmax score, lowest class ID on ties."""
    return CentroidIndex.from_store(store).vote(vector, config)


def predict_voting_batch(
    store: MemoryStore, vectors, config: VotingConfig = VotingConfig()
) -> np.ndarray:
    index = CentroidIndex.from_store(store)
    return np.array([index.vote(v, config) for v in vectors], dtype=np.int64)


def predict_ncm(store: MemoryStore, vector) -> int:
    """Nearest class mean; lowest class ID on ties."""
    return CentroidIndex.from_store(store).nearest_mean(vector)


def predict_ncm_batch(store: MemoryStore, vectors) -> np.ndarray:
    index = CentroidIndex.from_store(store)
    means = index.class_means()
    x = np.asarray(vectors, dtype=np.float64)
    d2 = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    return index.class_ids[np.argmin(d2, axis=1)]
