"""Person-grouped splitting and the quality gate on a synthetic cohort.

    python demos/02_split_and_gate.py
"""

import numpy as np

from funduskit.dataset import class_weights, grouped_split, stratified_split, undersample_majority
from funduskit.quality import (
    ContingencyTable2x2,
    QualityScore,
    apply_threshold,
    chi_square_independence,
    filter_both_eyes_good,
)
from funduskit.synth import SynthConfig, make_records

rng = np.random.default_rng(7)
records = make_records(SynthConfig(participants=2000, seed=7), rng)
print(f"cohort: {len(records)} participants, "
      f"{sum(r.sex == 'male' for r in records)} male")

# 60/20/20 split at participant level: both eyes always share a subset.
split = grouped_split(records, (0.6, 0.2, 0.2), seed=7)
print("grouped split sizes:", split.sizes())

# Stratified variant: per-stratum ratios stay within one item.
strat = stratified_split(records, seed=7,
                         stratum_key=lambda r: r.sex or "unknown")
for sex in ("male", "female"):
    counts = {s: 0 for s in ("train", "val", "test")}
    for r in records:
        if r.sex == sex:
            counts[strat[r.participant_id]] += 1
    print(f"  {sex}: {counts}")

# Quality gate: scores above 0.5 are good; a participant survives only
# with both eyes present and good.
scores = []
for r in records:
    for eye, rate in (("L", 0.54), ("R", 0.58)):
        good = rng.uniform() < rate
        scores.append(QualityScore(r.participant_id, eye,
                                   0.5 + 0.5 * rng.uniform() if good
                                   else 0.49 * rng.uniform()))
labels = apply_threshold(scores, tau=0.5)
kept = filter_both_eyes_good(records, labels)
print(f"gate kept {len(kept)}/{len(records)} "
      f"(expect about {0.54 * 0.58:.3f} of the cohort)")

# Is quality independent of eye side? Pearson chi-square on the 2x2.
table = ContingencyTable2x2.from_labels(labels)
result = chi_square_independence(table)
print(f"chi-square: statistic {result.statistic:.3f}, p {result.p_value:.3g} "
      f"({'dependent' if result.p_value < 0.05 else 'no evidence of dependence'})")

# Imbalance remedies for the smoking task.
smokers = [r for r in records if r.smoking_raw == "current"]
print(f"\nsmoking imbalance: {len(smokers)} current smokers")
weights = class_weights([1 if r.smoking_raw == "current" else 0
                         for r in records if r.smoking_raw is not None])
print(f"class weights: positive {weights[1]:.2f}, negative {weights[0]:.2f}")
balanced = undersample_majority(
    [r for r in records if r.smoking_raw is not None],
    lambda r: r.smoking_raw == "current",
    n_majority=len(smokers), seed=7,
)
print(f"undersampled training view: {len(balanced)} records "
      f"({len(smokers)} smokers + {len(balanced) - len(smokers)} sampled non-smokers)")
