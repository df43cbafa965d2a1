"""Evaluation metrics for regression and binary classification.

Everything here is implemented directly over numpy so the definitions
are explicit: MAE, R2, rank-based ROC AUC with half credit for ties,
average-precision PR AUC, confusion-matrix ratios at a threshold, and
the constant-mean baseline used to contextualize regression results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    EmptyData,
    LengthMismatch,
    NoPositives,
    OneClassOnly,
    ZeroVariance,
)

__all__ = [
    "mae",
    "r2",
    "roc_auc",
    "pr_auc",
    "threshold_metrics",
    "baseline_continuous",
    "ThresholdMetrics",
    "ContinuousBaseline",
]


def _paired(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.size != t.size:
        raise LengthMismatch(f"{p.size} predictions vs {t.size} truths")
    if p.size == 0:
        raise EmptyData("empty sample")
    if not (np.isfinite(p).all() and np.isfinite(t).all()):
        raise ValueError("non-finite values in input")
    return p, t


def _binary(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s, y = _paired(scores, labels)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0/1")
    return s, y.astype(bool)


def mae(pred, truth) -> float:
    """Mean absolute error."""
    p, t = _paired(pred, truth)
    return float(np.abs(p - t).mean())


def r2(pred, truth) -> float:
    """Coefficient of determination: ``1 - SS_res / SS_tot``.

    The evaluation-set-mean predictor scores exactly 0; predictors worse
    than the mean go negative.

    Raises:
        ZeroVariance: the truth values are all equal.
    """
    p, t = _paired(pred, truth)
    if p.size < 2:
        raise EmptyData("r2 needs at least 2 samples")
    ss_tot = float(((t - t.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ZeroVariance("truth has no variance")
    ss_res = float(((t - p) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    # Group boundaries of tied runs in the sorted order.
    boundaries = np.flatnonzero(np.diff(sorted_vals)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [values.size]))
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0  # mean of 1-based ranks s+1..e
    return ranks


def roc_auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative.

    Mann-Whitney formulation via average ranks; tied scores get half
    credit.

    Raises:
        OneClassOnly: all labels are positive or all negative.
    """
    s, y = _binary(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly(f"{n_pos} positives, {n_neg} negatives")
    ranks = _average_ranks(s)
    rank_sum = float(ranks[y].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pr_auc(scores, labels) -> float:
    """Area under the precision-recall curve, average-precision form.

    ``AP = sum_k (R_k - R_{k-1}) * P_k`` over descending distinct score
    thresholds, which avoids the optimism of trapezoids in PR space.
    With all scores equal this degenerates to the prevalence.

    Raises:
        NoPositives: no positive labels.
    """
    s, y = _binary(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise NoPositives("no positive labels")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order].astype(np.float64)
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(1.0 - y_sorted)
    # Evaluate only at the last index of each tied-score run.
    threshold_idx = np.flatnonzero(np.append(np.diff(s_sorted) != 0, True))
    precision = tp[threshold_idx] / (tp[threshold_idx] + fp[threshold_idx])
    recall = tp[threshold_idx] / n_pos
    recall_steps = np.diff(np.concatenate(([0.0], recall)))
    return float((recall_steps * precision).sum())


@dataclass(frozen=True)
class ThresholdMetrics:
    """Confusion-matrix ratios at a fixed threshold.

    ``precision`` is None (missing) when nothing was predicted positive,
    rather than being forced to 0.
    """

    accuracy: float
    precision: float | None
    recall: float


def threshold_metrics(scores, labels, tau: float = 0.5) -> ThresholdMetrics:
    """Accuracy, precision, and recall with predict-positive iff score >= tau.

    Raises:
        OneClassOnly: labels contain a single class, leaving recall (or
            the complement rates) undefined.
    """
    s, y = _binary(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise OneClassOnly(f"{n_pos} positives out of {y.size}")
    predicted = s >= tau
    tp = int((predicted & y).sum())
    accuracy = float((predicted == y).mean())
    recall = tp / n_pos
    n_predicted = int(predicted.sum())
    precision = tp / n_predicted if n_predicted > 0 else None
    return ThresholdMetrics(accuracy=accuracy, precision=precision, recall=recall)


@dataclass(frozen=True)
class ContinuousBaseline:
    """Performance of the constant evaluation-set-mean predictor."""

    mae_baseline: float
    r2_baseline: float = 0.0


def baseline_continuous(truth_eval) -> ContinuousBaseline:
    """Baseline for a continuous task: predict the evaluation-set mean.

    Its MAE equals the mean absolute deviation of the truth values and
    its R2 is 0 by construction.

    Raises:
        ZeroVariance: constant truth leaves baseline R2 undefined.
    """
    t = np.asarray(truth_eval, dtype=np.float64).ravel()
    if t.size == 0:
        raise EmptyData("empty evaluation set")
    mean = t.mean()
    if float(((t - mean) ** 2).sum()) == 0.0:
        raise ZeroVariance("constant truth: baseline R2 undefined")
    return ContinuousBaseline(mae_baseline=float(np.abs(t - mean).mean()))
