"""Metrics and percentile-bootstrap confidence intervals.

    python demos/03_metrics_and_bootstrap.py
"""

import numpy as np

from funduskit.bootstrap import BootstrapConfig, bootstrap_ci
from funduskit.metrics import baseline_continuous, mae, pr_auc, r2, roc_auc

rng = np.random.default_rng(0)

# A regression task: noisy age predictions for 300 people.
truth = rng.normal(56.0, 8.2, size=300)
pred = truth + rng.normal(0.0, 3.0, size=300)
print(f"age example: MAE {mae(pred, truth):.3f}, R2 {r2(pred, truth):.4f}")

baseline = baseline_continuous(truth)
print(f"mean-predictor baseline: MAE {baseline.mae_baseline:.3f}, "
      f"R2 {baseline.r2_baseline:.1f}")

# A classification task with heavy imbalance (8% positives).
labels = (rng.uniform(size=300) < 0.08).astype(int)
scores = np.clip(0.3 + 0.35 * labels + rng.normal(0, 0.15, size=300), 0, 1)
print(f"smoking-style example: AUC {roc_auc(scores, labels):.4f}, "
      f"AUC-PR {pr_auc(scores, labels):.4f} "
      f"(prevalence {labels.mean():.3f} is the PR chance level)")

# Percentile bootstrap: resample the evaluation set with replacement,
# recompute the statistic 1000 times, read off the 2.5/97.5 percentiles.
cfg = BootstrapConfig(replicates=1000, level=0.95, seed=1)
result = bootstrap_ci(lambda p, t: r2(p, t), (pred, truth), cfg)
print(f"\nR2 {result.estimate:.4f}, 95% CI [{result.ci_low:.4f}, {result.ci_high:.4f}]")

result = bootstrap_ci(lambda s, y: roc_auc(s, y), (scores, labels), cfg, workers=4)
print(f"AUC {result.estimate:.4f}, 95% CI [{result.ci_low:.4f}, {result.ci_high:.4f}] "
      f"({result.degenerate_redraws} one-class resamples redrawn)")

# Replicates are seeded per index, so worker count cannot change results.
serial = bootstrap_ci(lambda s, y: roc_auc(s, y), (scores, labels), cfg, workers=1)
assert np.array_equal(serial.replicate_values, result.replicate_values)
print("1-worker and 4-worker runs are bit-identical")

# Mini coverage experiment: how often does the interval catch the truth?
hits = 0
sims = 100
for i in range(sims):
    sample = rng.normal(size=200)
    ci = bootstrap_ci(lambda x: float(np.mean(x)), sample,
                      BootstrapConfig(replicates=500, seed=i))
    hits += ci.ci_low <= 0.0 <= ci.ci_high
print(f"\ncoverage of the true mean over {sims} simulations: {hits / sims:.2f} "
      "(nominal 0.95)")
