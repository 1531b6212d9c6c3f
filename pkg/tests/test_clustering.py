import numpy as np
import pytest

from cbclpr.clustering import (
    Cluster,
    CovarianceMode,
    cluster_class,
    kmeans_class,
)

FULL = CovarianceMode.FULL
DIAG = CovarianceMode.DIAGONAL


def oracle_covariance(members, mode):
    """Independent covariance oracle (numpy's own estimator)."""
    if len(members) == 1:
        dim = members.shape[1]
        return np.zeros(dim) if mode is DIAG else np.zeros((dim, dim))
    if mode is DIAG:
        return np.var(members, axis=0, ddof=1)
    return np.cov(members, rowvar=False).reshape(members.shape[1], members.shape[1])


class TestThresholdPass:
    def test_two_close_vectors_merge(self):
        clusters, assignment = cluster_class([[0.0, 0.0], [2.0, 2.0]], 10.0)
        assert len(clusters) == 1
        np.testing.assert_allclose(clusters[0].centroid, [1.0, 1.0])
        assert clusters[0].count == 2
        np.testing.assert_array_equal(assignment, [0, 0])

    def test_two_far_vectors_separate(self):
        clusters, _ = cluster_class([[0.0, 0.0], [2.0, 2.0]], 1.0)
        assert len(clusters) == 2
        np.testing.assert_allclose(clusters[0].centroid, [0.0, 0.0])
        np.testing.assert_allclose(clusters[1].centroid, [2.0, 2.0])
        assert [c.count for c in clusters] == [1, 1]
        assert all(np.all(c.covariance == 0) for c in clusters)

    def test_mixed_merge_and_separate(self):
        clusters, _ = cluster_class([[0.0, 0.0], [0.0, 2.0], [0.0, 100.0]], 5.0)
        assert len(clusters) == 2
        np.testing.assert_allclose(clusters[0].centroid, [0.0, 1.0])
        assert clusters[0].count == 2
        np.testing.assert_allclose(clusters[0].covariance, [[0.0, 0.0], [0.0, 2.0]])
        np.testing.assert_allclose(clusters[1].centroid, [0.0, 100.0])
        assert clusters[1].count == 1

    def test_equidistant_tie_goes_to_lowest_index(self):
        # centroids at 0 and 2; query 1 is equidistant
        clusters, assignment = cluster_class([[0.0], [2.0], [1.0]], 1.5)
        assert assignment[2] == 0

    def test_strict_threshold_comparison(self):
        # distance exactly equal to the threshold opens a new cluster
        clusters, _ = cluster_class([[0.0], [3.0]], 3.0)
        assert len(clusters) == 2

    def test_errors(self):
        with pytest.raises(ValueError):
            cluster_class([], 1.0)
        with pytest.raises(ValueError):
            cluster_class([[1.0], [1.0, 2.0]], 1.0)
        with pytest.raises(ValueError):
            cluster_class([[1.0]], -0.5)


class TestThresholdLimits:
    def test_zero_threshold_one_cluster_per_vector(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(30, 4))  # distinct almost surely
        clusters, _ = cluster_class(pts, 0.0)
        assert len(clusters) == 30

    def test_huge_threshold_single_cluster(self):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=(40, 3))
        diameter = np.linalg.norm(pts[:, None] - pts[None], axis=2).max()
        clusters, _ = cluster_class(pts, diameter * 1.5)
        assert len(clusters) == 1
        np.testing.assert_allclose(
            clusters[0].centroid, pts.mean(axis=0), atol=1e-10
        )


class TestRandomizedInvariants:
    def test_mean_identity_counts_and_covariance(self):
        rng = np.random.default_rng(42)
        for _ in range(150):
            n = int(rng.integers(1, 51))
            dim = int(rng.integers(1, 9))
            pts = rng.normal(scale=rng.uniform(0.5, 3.0), size=(n, dim))
            threshold = float(rng.uniform(0.0, 6.0))
            mode = FULL if rng.integers(2) else DIAG
            clusters, assignment = cluster_class(pts, threshold, mode)
            assert sum(c.count for c in clusters) == n
            for j, c in enumerate(clusters):
                members = pts[assignment == j]
                assert c.count == len(members)
                assert (
                    np.abs(c.centroid - members.mean(axis=0)).max() <= 1e-4
                )
                np.testing.assert_allclose(
                    c.covariance,
                    oracle_covariance(members, mode),
                    atol=1e-5,
                    rtol=1e-5,
                )
                c.validate()

    def test_diagonal_matches_full_diagonal(self):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(60, 5))
        full, _ = cluster_class(pts, 2.5, FULL)
        diag, _ = cluster_class(pts, 2.5, DIAG)
        assert len(full) == len(diag)
        for f, d in zip(full, diag):
            np.testing.assert_allclose(np.diag(f.covariance), d.covariance, atol=1e-6)


class TestKmeans:
    def test_k_equals_n_singletons(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(8, 3))
        clusters = kmeans_class(pts, 8, seed=0)
        assert sorted(c.count for c in clusters) == [1] * 8
        assert all(np.all(c.covariance == 0) for c in clusters)

    def test_k_one_global_mean(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(20, 4))
        (cluster,) = kmeans_class(pts, 1, seed=0)
        np.testing.assert_allclose(cluster.centroid, pts.mean(axis=0), atol=1e-12)
        assert cluster.count == 20

    def test_two_separated_groups(self):
        pts = np.array([[0.0, 0.0], [0.2, 0.0], [9.0, 9.0], [9.2, 9.0]])
        clusters = kmeans_class(pts, 2, seed=5)
        got = sorted(c.centroid.tolist() for c in clusters)
        # brute-force optimal 2-partition by within-cluster SSE
        best, best_sse = None, np.inf
        for bits in range(1, 7):
            mask = np.array([(bits >> i) & 1 for i in range(4)], dtype=bool)
            if mask.all() or not mask.any():
                continue
            sse = sum(
                ((grp - grp.mean(axis=0)) ** 2).sum()
                for grp in (pts[mask], pts[~mask])
            )
            if sse < best_sse:
                best_sse = sse
                best = sorted(
                    [pts[mask].mean(axis=0).tolist(), pts[~mask].mean(axis=0).tolist()]
                )
        np.testing.assert_allclose(got, best)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(6)
        pts = rng.normal(size=(50, 4))
        a = kmeans_class(pts, 7, seed=123)
        b = kmeans_class(pts, 7, seed=123)
        for ca, cb in zip(a, b):
            np.testing.assert_array_equal(ca.centroid, cb.centroid)
            assert ca.count == cb.count

    def test_count_conservation_and_covariance(self):
        rng = np.random.default_rng(8)
        pts = rng.normal(size=(40, 3))
        clusters = kmeans_class(pts, 5, seed=1, mode=DIAG)
        assert sum(c.count for c in clusters) == 40
        for c in clusters:
            c.validate()

    def test_k_out_of_range(self):
        pts = np.zeros((3, 2))
        with pytest.raises(ValueError):
            kmeans_class(pts, 4, seed=0)
        with pytest.raises(ValueError):
            kmeans_class(pts, 0, seed=0)


class TestClusterValidate:
    def test_rejects_asymmetric(self):
        c = Cluster(np.zeros(2), 2, np.array([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(ValueError, match="symmetric"):
            c.validate()

    def test_rejects_nonzero_covariance_singleton(self):
        c = Cluster(np.zeros(2), 1, np.eye(2))
        with pytest.raises(ValueError, match="count-1"):
            c.validate()

    def test_rejects_negative_variance(self):
        c = Cluster(np.zeros(2), 3, np.array([1.0, -0.1]))
        with pytest.raises(ValueError, match="negative"):
            c.validate()
