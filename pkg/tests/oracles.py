"""Independent brute-force reference implementations.

These deliberately take the slow, direct route (pair counting, dense
convolution, explicit confusion tallies, closed-form 2x2 chi-square) so
they share no code path with the library. Expected values in the tests
are either computed here or frozen from a run of these functions.
"""

from __future__ import annotations

import numpy as np


def oracle_mae(pred, truth) -> float:
    total = 0.0
    for p, t in zip(pred, truth, strict=True):
        total += abs(p - t)
    return total / len(pred)


def oracle_r2(pred, truth) -> float:
    mean = sum(truth) / len(truth)
    ss_res = sum((t - p) ** 2 for p, t in zip(pred, truth, strict=True))
    ss_tot = sum((t - mean) ** 2 for t in truth)
    return 1.0 - ss_res / ss_tot


def oracle_roc_auc(scores, labels) -> float:
    """Direct pair counting: wins + half credit for ties."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = s[y == 1]
    neg = s[y == 0]
    diff = pos[:, None] - neg[None, :]
    wins = float((diff > 0).sum())
    ties = float((diff == 0).sum())
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def oracle_pr_auc(scores, labels) -> float:
    """Walk descending distinct thresholds, summing recall steps times precision."""
    s = list(map(float, scores))
    y = list(map(int, labels))
    n_pos = sum(y)
    area = 0.0
    prev_recall = 0.0
    for tau in sorted(set(s), reverse=True):
        tp = sum(1 for si, yi in zip(s, y) if si >= tau and yi == 1)
        fp = sum(1 for si, yi in zip(s, y) if si >= tau and yi == 0)
        precision = tp / (tp + fp)
        recall = tp / n_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def oracle_threshold_metrics(scores, labels, tau=0.5):
    tp = fp = tn = fn = 0
    for s, y in zip(scores, labels, strict=True):
        predicted = s >= tau
        if predicted and y == 1:
            tp += 1
        elif predicted and y == 0:
            fp += 1
        elif not predicted and y == 1:
            fn += 1
        else:
            tn += 1
    accuracy = (tp + tn) / (tp + fp + tn + fn)
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn)
    return accuracy, precision, recall


def oracle_chi2_2x2(a, b, c, d) -> float:
    """Closed-form Pearson statistic for a 2x2 table (no correction)."""
    n = a + b + c + d
    return n * (a * d - b * c) ** 2 / ((a + b) * (c + d) * (a + c) * (b + d))


def oracle_dense_gaussian(plane: np.ndarray, kernel1d: np.ndarray) -> np.ndarray:
    """Dense 2-D convolution with the outer-product kernel, symmetric padding."""
    radius = (len(kernel1d) - 1) // 2
    kernel2d = np.outer(kernel1d, kernel1d)
    padded = np.pad(plane.astype(np.float64), radius, mode="symmetric")
    out = np.zeros_like(plane, dtype=np.float64)
    for i in range(plane.shape[0]):
        for j in range(plane.shape[1]):
            window = padded[i:i + 2 * radius + 1, j:j + 2 * radius + 1]
            out[i, j] = float((window * kernel2d).sum())
    return out


def oracle_percentile_pair(values, level) -> tuple[float, float]:
    """Order-statistic percentile endpoints from an explicit sort."""
    ordered = sorted(float(v) for v in values)
    n = len(ordered)
    alpha_half = (1.0 - level) / 2.0
    k_lo = int(np.floor(alpha_half * n))
    k_hi = int(np.ceil((1.0 - alpha_half) * n)) - 1
    k_lo = min(max(k_lo, 0), n - 1)
    k_hi = min(max(k_hi, 0), n - 1)
    return ordered[k_lo], ordered[k_hi]


def disk_image(size: int, cx: int, cy: int, radius: int, value: int = 255) -> np.ndarray:
    """Clean filled disk on black, the geometry oracle for mask detection."""
    yy, xx = np.ogrid[:size, :size]
    inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
    img = np.zeros((size, size, 3), dtype=np.uint8)
    img[inside] = value
    return img
