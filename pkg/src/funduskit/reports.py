"""Metric reports with bootstrap intervals, overall and per subgroup.

For each task the report carries the task's headline metric (ROC AUC for
classification, R2 for regression) within every requested subgroup, plus
MAE / PR-AUC rows for the overall view. Subgroups follow the study's
analysis axes: sex, british/irish ancestry, the age bins (39,50] and
(50,inf), and eye side. Eye rows are computed on the unfused per-eye
predictions; every other row uses the fused per-participant values.

The report file is a CSV whose columns are exactly the report fields:
``task,metric,estimate,ci_low,ci_high,n,subgroup,baseline``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bootstrap import BootstrapConfig, bootstrap_ci
from .dataset import ParticipantRecord, aggregate_measurements, binarize_smoking
from .exceptions import (
    DataError,
    DegenerateStatistic,
    EmptyData,
    EmptySubgroup,
    SchemaError,
    TooManyDegenerateResamples,
)
from .fusion import CLASSIFICATION_TASKS, FUSED, PredictionRecord, fuse_all
from .metrics import baseline_continuous, mae, pr_auc, r2, roc_auc

GROUPINGS = ("overall", "sex", "british_irish", "age_bin", "eye")

AGE_BIN_LOW = "(39,50]"
AGE_BIN_HIGH = "(50,inf)"

__all__ = [
    "GROUPINGS",
    "MetricReport",
    "ReportBundle",
    "SubgroupKey",
    "age_bin",
    "truth_value",
    "subgroup_report",
    "write_report",
    "read_report",
    "write_scatter",
]


@dataclass(frozen=True)
class SubgroupKey:
    """One evaluation stratum, e.g. kind="sex", value="female"."""

    kind: str
    value: str

    @property
    def label(self) -> str:
        if self.kind == "overall":
            return "overall"
        return f"{self.kind}={self.value}"


@dataclass(frozen=True)
class MetricReport:
    """Point estimate with bootstrap interval for one (task, metric, subgroup)."""

    task: str
    metric: str
    estimate: float
    ci_low: float
    ci_high: float
    n: int
    subgroup: str
    baseline: float

    def __post_init__(self):
        if not self.ci_low <= self.estimate <= self.ci_high:
            raise ValueError(
                f"estimate {self.estimate} outside interval "
                f"[{self.ci_low}, {self.ci_high}]"
            )


@dataclass(frozen=True)
class ReportBundle:
    """Report rows plus the subgroup/metric combinations that were skipped."""

    rows: tuple[MetricReport, ...]
    skipped: tuple[str, ...]

    def for_task(self, task: str) -> list[MetricReport]:
        return [r for r in self.rows if r.task == task]


def age_bin(age: float | None) -> str | None:
    """Assign the study's age bins; ages at or below 39 fall outside both."""
    if age is None:
        return None
    if 39.0 < age <= 50.0:
        return AGE_BIN_LOW
    if age > 50.0:
        return AGE_BIN_HIGH
    return None


def truth_value(record: ParticipantRecord, task: str) -> float | None:
    """Ground-truth value of a task for one participant, or None if missing.

    Sex is encoded with male as the positive class; smoking is binarized
    to current vs not current; repeated pressure readings are averaged.
    """
    if task == "age":
        return record.age
    if task == "sex":
        return None if record.sex is None else float(record.sex == "male")
    if task == "smoking":
        status = binarize_smoking(record.smoking_raw)
        return None if status is None else float(status)
    if task == "bmi":
        return record.bmi
    if task == "sbp":
        return None if record.sbp is None else aggregate_measurements(record.sbp)
    if task == "dbp":
        return None if record.dbp is None else aggregate_measurements(record.dbp)
    if task == "hba1c":
        return record.hba1c
    if task == "cholesterol":
        return record.cholesterol
    raise ValueError(f"no ground truth defined for task {task!r}")


def _report_row(
    task: str,
    metric_name: str,
    statistic,
    values: np.ndarray,
    truths: np.ndarray,
    subgroup: str,
    baseline: float,
    cfg: BootstrapConfig,
    workers: int,
) -> MetricReport:
    result = bootstrap_ci(statistic, (values, truths), cfg, workers=workers)
    # A percentile interval can, in principle, exclude the full-sample
    # estimate; widen it so the reported triple stays consistent.
    return MetricReport(
        task=task,
        metric=metric_name,
        estimate=result.estimate,
        ci_low=min(result.ci_low, result.estimate),
        ci_high=max(result.ci_high, result.estimate),
        n=int(values.size),
        subgroup=subgroup,
        baseline=baseline,
    )


def _rows_for_sample(
    task: str,
    values: np.ndarray,
    truths: np.ndarray,
    subgroup: str,
    cfg: BootstrapConfig,
    workers: int,
    overall: bool,
) -> list[MetricReport]:
    if values.size == 0:
        raise EmptySubgroup(f"no evaluable records in {subgroup}")
    rows = []
    if task in CLASSIFICATION_TASKS:
        rows.append(_report_row(task, "AUC_ROC", lambda v, t: roc_auc(v, t),
                                values, truths, subgroup, 0.5, cfg, workers))
        if overall:
            prevalence = float(truths.mean())
            rows.append(_report_row(task, "AUC_PR", lambda v, t: pr_auc(v, t),
                                    values, truths, subgroup, prevalence, cfg, workers))
    else:
        rows.append(_report_row(task, "R2", lambda v, t: r2(v, t),
                                values, truths, subgroup, 0.0, cfg, workers))
        if overall:
            mae_base = baseline_continuous(truths).mae_baseline
            rows.append(_report_row(task, "MAE", lambda v, t: mae(v, t),
                                    values, truths, subgroup, mae_base, cfg, workers))
    return rows


def _joined(
    predictions: Sequence[PredictionRecord],
    records_by_id: Mapping[str, ParticipantRecord],
    task: str,
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Align predictions with ground truth; drop pairs with missing truth."""
    values, truths, pids = [], [], []
    for p in predictions:
        record = records_by_id.get(p.participant_id)
        if record is None:
            continue
        truth = truth_value(record, task)
        if truth is None:
            continue
        values.append(p.value)
        truths.append(truth)
        pids.append(p.participant_id)
    return np.asarray(values, dtype=np.float64), np.asarray(truths, dtype=np.float64), pids


def _subgroup_of(record: ParticipantRecord, kind: str) -> str | None:
    if kind == "sex":
        return record.sex
    if kind == "british_irish":
        return None if record.british_irish is None else str(record.british_irish)
    if kind == "age_bin":
        return age_bin(record.age)
    raise ValueError(f"unknown grouping kind {kind!r}")


def subgroup_report(
    predictions: Sequence[PredictionRecord],
    records: Sequence[ParticipantRecord],
    tasks: Sequence[str],
    groupings: Sequence[str] = GROUPINGS,
    cfg: BootstrapConfig = BootstrapConfig(),
    split: str | None = "test",
    workers: int = 1,
) -> ReportBundle:
    """Build metric rows for every requested task and subgroup.

    ``split`` selects which prediction rows to evaluate (None or "all"
    keeps everything). Subgroups on which a statistic is undefined (one
    class only, zero variance, empty join, too many degenerate
    resamples) are skipped and listed in the bundle instead of aborting
    the run.
    """
    unknown = set(groupings) - set(GROUPINGS)
    if unknown:
        raise ValueError(f"unknown groupings {sorted(unknown)}; valid: {GROUPINGS}")
    records_by_id = {r.participant_id: r for r in records}
    if split in (None, "all"):
        selected = [p for p in predictions if p.eye != FUSED]
    else:
        selected = [p for p in predictions if p.split == split and p.eye != FUSED]

    rows: list[MetricReport] = []
    skipped: list[str] = []

    def try_rows(task, values, truths, subgroup, overall=False):
        try:
            rows.extend(_rows_for_sample(task, values, truths, subgroup,
                                         cfg, workers, overall))
        except (DegenerateStatistic, EmptySubgroup, EmptyData,
                TooManyDegenerateResamples) as err:
            skipped.append(f"{task}/{subgroup}: {type(err).__name__}: {err}")

    for task in tasks:
        per_eye = [p for p in selected if p.task == task]
        fused = fuse_all(per_eye).fused
        f_values, f_truths, f_pids = _joined(fused, records_by_id, task)

        for kind in groupings:
            if kind == "overall":
                try_rows(task, f_values, f_truths, "overall", overall=True)
            elif kind == "eye":
                for eye in ("L", "R"):
                    eye_preds = [p for p in per_eye if p.eye == eye]
                    e_values, e_truths, _ = _joined(eye_preds, records_by_id, task)
                    try_rows(task, e_values, e_truths, f"eye={eye}")
            else:
                buckets: dict[str, list[int]] = {}
                for i, pid in enumerate(f_pids):
                    value = _subgroup_of(records_by_id[pid], kind)
                    if value is not None:
                        buckets.setdefault(value, []).append(i)
                if not buckets:
                    skipped.append(f"{task}/{kind}: EmptySubgroup: no members")
                for value in sorted(buckets):
                    idx = np.array(buckets[value], dtype=np.intp)
                    try_rows(task, f_values[idx], f_truths[idx], f"{kind}={value}")

    return ReportBundle(rows=tuple(rows), skipped=tuple(skipped))


# --- report files -------------------------------------------------------------

_FIELDS = ("task", "metric", "estimate", "ci_low", "ci_high", "n", "subgroup", "baseline")


def write_report(path: str | Path, bundle: ReportBundle | Iterable[MetricReport]) -> None:
    rows = bundle.rows if isinstance(bundle, ReportBundle) else tuple(bundle)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_FIELDS)
        for r in rows:
            writer.writerow([r.task, r.metric, repr(r.estimate), repr(r.ci_low),
                             repr(r.ci_high), r.n, r.subgroup, repr(r.baseline)])


def read_report(path: str | Path) -> list[MetricReport]:
    rows: list[MetricReport] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != _FIELDS:
            raise SchemaError(f"{path}: expected header {','.join(_FIELDS)}")
        for row in reader:
            if not row:
                continue
            rows.append(MetricReport(
                task=row[0], metric=row[1], estimate=float(row[2]),
                ci_low=float(row[3]), ci_high=float(row[4]), n=int(row[5]),
                subgroup=row[6], baseline=float(row[7]),
            ))
    return rows


def write_scatter(path: str | Path, truths, predictions) -> None:
    """Per-task truth/prediction pairs for external plotting."""
    t = np.asarray(truths, dtype=np.float64).ravel()
    p = np.asarray(predictions, dtype=np.float64).ravel()
    if t.size != p.size:
        raise DataError(f"scatter columns differ in length: {t.size} vs {p.size}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["truth", "prediction"])
        for ti, pi in zip(t, p):
            writer.writerow([repr(float(ti)), repr(float(pi))])
