"""Synthetic multi-modal benchmark data for desk-scale experiments.

Each class is a mixture of one or more axis-aligned Gaussian modes with
centers drawn uniformly from a box.  Multi-modal classes are the point:
a single class mean then sits in empty space between its modes, which is
exactly the regime where nearest-class-mean prediction degrades while
cluster-based methods do not.
"""

from __future__ import annotations

import numpy as np

from .features import FeatureDataset


def make_synthetic(
    n_classes: int = 20,
    dim: int = 16,
    train_per_class: int = 100,
    test_per_class: int = 50,
    modes: tuple[int, int] = (1, 3),
    center_range: float = 40.0,
    sigma: float = 2.0,
    seed: int = 0,
) -> tuple[FeatureDataset, FeatureDataset]:
    """Generate (train, test) datasets of `n_classes` Gaussian mixtures.

    Per class, the number of modes is drawn uniformly from `modes`
    (inclusive), mode centers from [-center_range, center_range]^dim, and
    per-coordinate standard deviations from sigma * U(0.5, 1.5).  Records
    are grouped by class; within a class the mode sequence is random, so
    the leading records of a class already span its modes.
    """
    if modes[0] < 1 or modes[0] > modes[1]:
        raise ValueError(f"invalid mode range {modes}")
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    train_labels, test_labels = [], []
    for cid in range(n_classes):
        k = int(rng.integers(modes[0], modes[1] + 1))
        centers = rng.uniform(-center_range, center_range, (k, dim))
        scales = sigma * rng.uniform(0.5, 1.5, (k, dim))

        def draw(n):
            which = rng.integers(0, k, n)
            return centers[which] + rng.standard_normal((n, dim)) * scales[which]

        train_parts.append(draw(train_per_class))
        train_labels.append(np.full(train_per_class, cid))
        test_parts.append(draw(test_per_class))
        test_labels.append(np.full(test_per_class, cid))
    train = FeatureDataset(np.concatenate(train_labels), np.vstack(train_parts))
    test = FeatureDataset(np.concatenate(test_labels), np.vstack(test_parts))
    return train, test
