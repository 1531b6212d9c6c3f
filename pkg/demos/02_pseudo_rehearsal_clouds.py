"""Replaying a 2-D feature space from its cluster memory.

Builds cluster memory for two multi-modal 2-D classes, generates pseudo-
exemplars from the stored Gaussians, and writes original vs. replayed
point clouds as CSV (plus per-class moment discrepancies) into
demo_output/.  The replayed cloud covers the same regions as the original
even though no original vector is retained.

Also shows the few-shot variant: clustering only 10 vectors per class and
replaying a larger fixed number (40) from the resulting clusters.
"""

import json
from pathlib import Path

from cbclpr import make_synthetic, run_pseudo_demo

out_root = Path(__file__).parent / "demo_output"

train, _ = make_synthetic(
    n_classes=2, dim=2, train_per_class=200, test_per_class=2,
    modes=(2, 3), center_range=10.0, sigma=1.0, seed=5,
)

print("full-data replay (every class replays its own record count):")
result = run_pseudo_demo(train, threshold=6.0, out_dir=out_root / "full", seed=0)
print(json.dumps(result.metrics, indent=2, sort_keys=True))
print(f"clouds written to {result.original_path} and {result.pseudo_path}")

print("\nfew-shot replay (10 originals per class, 40 pseudo-exemplars each):")
result = run_pseudo_demo(
    train, threshold=6.0, out_dir=out_root / "fewshot",
    shots=10, per_class=40, seed=0,
)
print(json.dumps(result.metrics, indent=2, sort_keys=True))

print("""
mean_rel_err and cov_rel_frobenius compare each class's replayed cloud
against the vectors the clusters were built from; both stay small even in
the 10-shot case, which is what makes training a classifier on replayed
data viable.  Plot the CSVs with any tool to see the clouds side by side
(label is the first column).
""")
