"""Left/right fusion and the subgroup evaluation report.

    python demos/04_fusion_and_reports.py
"""

import numpy as np

from funduskit.bootstrap import BootstrapConfig
from funduskit.fusion import PredictionRecord, fuse_all
from funduskit.metrics import r2
from funduskit.reports import subgroup_report, truth_value
from funduskit.synth import SynthConfig, make_records

rng = np.random.default_rng(3)
records = make_records(SynthConfig(participants=400, seed=3), rng)

# Per-eye predictions: truth + independent noise per eye.
preds = []
for r in records:
    for task in ("age", "sbp"):
        truth = truth_value(r, task)
        if truth is None:
            continue
        scale = 3.5 if task == "age" else 11.0
        for eye in ("L", "R"):
            preds.append(PredictionRecord(r.participant_id, eye, task,
                                          float(truth + rng.normal(0, scale)),
                                          "demo-model", "test"))

# Averaging the two eyes halves the noise variance, so fused R2 wins.
result = fuse_all(preds)
by_id = {r.participant_id: r for r in records}
for task in ("age", "sbp"):
    rows = {}
    for eye in ("L", "R"):
        sel = [p for p in preds if p.task == task and p.eye == eye]
        rows[eye] = r2([p.value for p in sel],
                       [truth_value(by_id[p.participant_id], task) for p in sel])
    fused_sel = [p for p in result.fused if p.task == task]
    fused_r2 = r2([p.value for p in fused_sel],
                  [truth_value(by_id[p.participant_id], task) for p in fused_sel])
    print(f"{task}: R2 left {rows['L']:.4f}, right {rows['R']:.4f}, "
          f"fused {fused_r2:.4f}")

# Full report: overall plus sex / ancestry / age-bin / eye subgroups,
# each with a bootstrap interval.
bundle = subgroup_report(
    preds, records, tasks=["age", "sbp"],
    groupings=["overall", "sex", "british_irish", "age_bin", "eye"],
    cfg=BootstrapConfig(replicates=500, seed=3), split="test",
)
print(f"\n{'task':<5} {'metric':<7} {'subgroup':<20} {'estimate':>9} "
      f"{'95% CI':>20} {'n':>5}")
for row in bundle.rows:
    ci = f"[{row.ci_low:.4f}, {row.ci_high:.4f}]"
    print(f"{row.task:<5} {row.metric:<7} {row.subgroup:<20} "
          f"{row.estimate:9.4f} {ci:>20} {row.n:>5}")
if bundle.skipped:
    print("skipped:", *bundle.skipped, sep="\n  ")
