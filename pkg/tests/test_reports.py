import csv

import numpy as np
import pytest

from funduskit.bootstrap import BootstrapConfig
from funduskit.dataset import ParticipantRecord
from funduskit.fusion import PredictionRecord
from funduskit.metrics import r2, roc_auc
from funduskit.reports import (
    AGE_BIN_HIGH,
    AGE_BIN_LOW,
    MetricReport,
    age_bin,
    read_report,
    subgroup_report,
    truth_value,
    write_report,
    write_scatter,
)

CFG = BootstrapConfig(replicates=60, seed=0)


def make_record(pid, age=55.0, sex="female", smoking="never", sbp=(140.0,),
                british_irish=True):
    return ParticipantRecord(
        participant_id=pid, left_image="l.png", right_image="r.png",
        age=age, sex=sex, smoking_raw=smoking, bmi=27.0, sbp=sbp, dbp=(80.0,),
        hba1c=36.0, cholesterol=5.5, ethnicity="british", british_irish=british_irish,
    )


def eye_preds(pid, task, left, right, split="test"):
    return [
        PredictionRecord(pid, "L", task, left, "m", split),
        PredictionRecord(pid, "R", task, right, "m", split),
    ]


class TestAgeBin:
    def test_edges(self):
        assert age_bin(39.0) is None
        assert age_bin(39.5) == AGE_BIN_LOW
        assert age_bin(50.0) == AGE_BIN_LOW
        assert age_bin(50.1) == AGE_BIN_HIGH
        assert age_bin(None) is None


class TestTruthValue:
    REC = make_record("p1", age=61.0, sex="male", smoking="current", sbp=(140.0, 150.0))

    def test_mapping(self):
        assert truth_value(self.REC, "age") == 61.0
        assert truth_value(self.REC, "sex") == 1.0
        assert truth_value(self.REC, "smoking") == 1.0
        assert truth_value(self.REC, "sbp") == 145.0
        assert truth_value(self.REC, "cholesterol") == 5.5

    def test_missing_propagates(self):
        bare = ParticipantRecord(participant_id="p2")
        for task in ("age", "sex", "smoking", "sbp", "bmi", "hba1c", "cholesterol"):
            assert truth_value(bare, task) is None

    def test_unknown_task(self):
        with pytest.raises(ValueError):
            truth_value(self.REC, "height")


class TestSubgroupReport:
    def build_cohort(self, n=40, seed=0):
        rng = np.random.default_rng(seed)
        records, preds = [], []
        for i in range(n):
            age = float(rng.uniform(41, 69))
            sex = "male" if i % 2 == 0 else "female"
            records.append(make_record(f"p{i:03d}", age=age, sex=sex,
                                       british_irish=bool(i % 4)))
            preds += eye_preds(f"p{i:03d}", "age",
                               age + rng.normal(0, 2), age + rng.normal(0, 2))
        return records, preds

    def test_overall_matches_direct_metric(self):
        records, preds = self.build_cohort()
        bundle = subgroup_report(preds, records, tasks=["age"],
                                 groupings=["overall"], cfg=CFG, split="test")
        row = next(r for r in bundle.rows if r.metric == "R2")
        fused = {}
        for p in preds:
            fused.setdefault(p.participant_id, []).append(p.value)
        values = [float(np.mean(v)) for _, v in sorted(fused.items())]
        truths = [r.age for r in records]
        assert row.estimate == pytest.approx(r2(values, truths), abs=1e-12)
        assert row.n == len(records)
        assert row.ci_low <= row.estimate <= row.ci_high

    def test_single_group_equals_overall(self):
        from dataclasses import replace

        records, preds = self.build_cohort()
        records = [replace(r, british_irish=True) for r in records]
        bundle = subgroup_report(preds, records, tasks=["age"],
                                 groupings=["overall", "british_irish"],
                                 cfg=CFG, split="test")
        overall = next(r for r in bundle.rows if r.subgroup == "overall" and r.metric == "R2")
        single = next(r for r in bundle.rows if r.subgroup == "british_irish=True")
        assert single.estimate == pytest.approx(overall.estimate, abs=1e-12)
        assert single.n == overall.n

    def test_disjoint_group_sizes_sum(self):
        records, preds = self.build_cohort()
        bundle = subgroup_report(preds, records, tasks=["age"],
                                 groupings=["overall", "sex"], cfg=CFG)
        overall = next(r for r in bundle.rows if r.subgroup == "overall" and r.metric == "R2")
        sex_n = sum(r.n for r in bundle.rows if r.subgroup.startswith("sex="))
        assert sex_n == overall.n

    def test_constructed_sex_effect_on_sbp(self):
        rng = np.random.default_rng(1)
        records, preds = [], []
        for i in range(60):
            sbp = float(rng.uniform(110, 170))
            sex = "female" if i % 2 == 0 else "male"
            records.append(make_record(f"p{i:03d}", sex=sex, sbp=(sbp,)))
            if sex == "female":  # exact predictions for women, noise for men
                preds += eye_preds(f"p{i:03d}", "sbp", sbp, sbp)
            else:
                preds += eye_preds(f"p{i:03d}", "sbp",
                                   float(rng.uniform(110, 170)),
                                   float(rng.uniform(110, 170)))
        bundle = subgroup_report(preds, records, tasks=["sbp"], groupings=["sex"],
                                 cfg=BootstrapConfig(replicates=200, seed=2))
        female = next(r for r in bundle.rows if r.subgroup == "sex=female")
        male = next(r for r in bundle.rows if r.subgroup == "sex=male")
        assert female.estimate > male.estimate
        assert female.ci_low > male.ci_high  # disjoint intervals

    def test_eye_rows_use_unfused_predictions(self):
        rng = np.random.default_rng(3)
        records, preds = [], []
        for i in range(30):
            age = float(rng.uniform(41, 69))
            records.append(make_record(f"p{i:03d}", age=age))
            # L is exact, R is pure noise: the eye rows must differ.
            preds += eye_preds(f"p{i:03d}", "age", age, float(rng.uniform(41, 69)))
        bundle = subgroup_report(preds, records, tasks=["age"], groupings=["eye"], cfg=CFG)
        left = next(r for r in bundle.rows if r.subgroup == "eye=L")
        right = next(r for r in bundle.rows if r.subgroup == "eye=R")
        assert left.estimate == pytest.approx(1.0, abs=1e-9)
        assert right.estimate < 0.9
        assert left.n == right.n == 30

    def test_one_class_subgroup_is_skipped_not_fatal(self):
        records, preds = [], []
        rng = np.random.default_rng(4)
        for i in range(20):
            sex = "male" if i % 2 == 0 else "female"
            records.append(make_record(f"p{i:03d}", sex=sex))
            value = float(np.clip(0.5 + (0.3 if sex == "male" else -0.3)
                                  + rng.normal(0, 0.1), 0, 1))
            preds += eye_preds(f"p{i:03d}", "sex", value, value)
        bundle = subgroup_report(preds, records, tasks=["sex"],
                                 groupings=["overall", "sex"], cfg=CFG)
        assert any(r.subgroup == "overall" for r in bundle.rows)
        assert not any(r.subgroup.startswith("sex=") for r in bundle.rows)
        assert len(bundle.skipped) == 2  # one per sex value

    def test_split_filter(self):
        records, preds = self.build_cohort()
        train_preds = [PredictionRecord(p.participant_id, p.eye, p.task, p.value,
                                        p.model_id, "train") for p in preds]
        bundle = subgroup_report(train_preds, records, tasks=["age"],
                                 groupings=["overall"], cfg=CFG, split="test")
        assert not bundle.rows  # nothing tagged test
        bundle_all = subgroup_report(train_preds, records, tasks=["age"],
                                     groupings=["overall"], cfg=CFG, split="all")
        assert bundle_all.rows

    def test_classification_overall_has_pr_row(self):
        rng = np.random.default_rng(5)
        records, preds = [], []
        for i in range(30):
            smoking = "current" if i < 8 else "never"
            records.append(make_record(f"p{i:03d}", smoking=smoking))
            value = float(np.clip((0.7 if smoking == "current" else 0.3)
                                  + rng.normal(0, 0.1), 0, 1))
            preds += eye_preds(f"p{i:03d}", "smoking", value, value)
        bundle = subgroup_report(preds, records, tasks=["smoking"],
                                 groupings=["overall"], cfg=CFG)
        metrics = {r.metric for r in bundle.rows}
        assert metrics == {"AUC_ROC", "AUC_PR"}
        auc_pr = next(r for r in bundle.rows if r.metric == "AUC_PR")
        assert auc_pr.baseline == pytest.approx(8 / 30)
        auc_roc = next(r for r in bundle.rows if r.metric == "AUC_ROC")
        assert auc_roc.baseline == 0.5


class TestReportFiles:
    ROW = MetricReport(task="age", metric="R2", estimate=0.8, ci_low=0.75,
                       ci_high=0.85, n=120, subgroup="overall", baseline=0.0)

    def test_roundtrip(self, tmp_path):
        path = tmp_path / "report.csv"
        write_report(path, [self.ROW])
        assert read_report(path) == [self.ROW]

    def test_header_fields_exact(self, tmp_path):
        path = tmp_path / "report.csv"
        write_report(path, [self.ROW])
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
        assert header == ["task", "metric", "estimate", "ci_low", "ci_high",
                          "n", "subgroup", "baseline"]

    def test_invariant_enforced(self):
        with pytest.raises(ValueError):
            MetricReport(task="age", metric="R2", estimate=0.9, ci_low=0.1,
                         ci_high=0.5, n=10, subgroup="overall", baseline=0.0)

    def test_scatter_file(self, tmp_path):
        path = tmp_path / "scatter.csv"
        write_scatter(path, [1.0, 2.0], [1.5, 2.5])
        lines = path.read_text().splitlines()
        assert lines[0] == "truth,prediction"
        assert len(lines) == 3
