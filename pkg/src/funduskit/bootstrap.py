"""Nonparametric percentile bootstrap for evaluation statistics.

Each replicate resamples the evaluation set with replacement at its full
size, recomputes the statistic, and the confidence interval is read off
the empirical percentiles of the replicate values.

Reproducibility contract: replicate ``r`` draws from an RNG derived from
``(seed, r)`` only, so results are bit-identical whether replicates run
serially or across any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exceptions import DegenerateStatistic, EmptyData, TooManyDegenerateResamples

__all__ = ["BootstrapConfig", "BootstrapResult", "bootstrap_ci", "replicate_rng"]


@dataclass(frozen=True)
class BootstrapConfig:
    """Replicate count, confidence level, and seed for one bootstrap run."""

    replicates: int = 1000
    level: float = 0.95
    seed: int = 0
    # Redraw budget: if more than this fraction of replicates needed a
    # redraw because the statistic was undefined, the run is rejected.
    max_degenerate_fraction: float = 0.10

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")


@dataclass(frozen=True)
class BootstrapResult:
    estimate: float
    ci_low: float
    ci_high: float
    replicate_values: np.ndarray
    degenerate_redraws: int


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent RNG stream for one replicate, a pure function of (seed, r)."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(replicate,))
    )


def _percentile_indices(n: int, level: float) -> tuple[int, int]:
    # Interval endpoints are order statistics: for B=1000 at level 0.95
    # these are the 26th and 975th sorted replicate values.
    alpha_half = (1.0 - level) / 2.0
    k_lo = min(max(math.floor(alpha_half * n), 0), n - 1)
    k_hi = min(max(math.ceil((1.0 - alpha_half) * n) - 1, 0), n - 1)
    return k_lo, k_hi


def bootstrap_ci(
    statistic: Callable[..., float],
    data,
    cfg: BootstrapConfig = BootstrapConfig(),
    workers: int = 1,
) -> BootstrapResult:
    """Point estimate plus percentile confidence interval for a statistic.

    Args:
        statistic: callable taking one positional array per data column
            and returning a float.
        data: one array-like, or a tuple/list of equal-length array-likes
            that are resampled jointly (e.g. ``(scores, labels)``).
        cfg: replicate count, level, and seed.
        workers: thread count; any value yields identical results.

    Resamples on which the statistic raises a :class:`DegenerateStatistic`
    (one-class AUC, zero-variance R2, ...) are redrawn from the same
    replicate stream so the replicate count stays fixed; the total number
    of redraws is reported and bounded by ``cfg.max_degenerate_fraction``.

    Raises:
        EmptyData: empty input.
        TooManyDegenerateResamples: the redraw budget was exceeded.
    """
    if isinstance(data, (tuple, list)) and len(data) > 0 and not np.isscalar(data[0]):
        columns = tuple(np.asarray(col) for col in data)
    else:
        columns = (np.asarray(data),)
    n = columns[0].shape[0]
    if n == 0:
        raise EmptyData("cannot bootstrap an empty sample")
    if any(col.shape[0] != n for col in columns):
        raise EmptyData("data columns differ in length")

    estimate = float(statistic(*columns))
    budget = int(cfg.max_degenerate_fraction * cfg.replicates)

    def one_replicate(r: int) -> tuple[float, int]:
        rng = replicate_rng(cfg.seed, r)
        redraws = 0
        while True:
            idx = rng.integers(0, n, size=n)
            try:
                return float(statistic(*(col[idx] for col in columns))), redraws
            except DegenerateStatistic:
                redraws += 1
                # One replicate alone exceeding the whole budget settles
                # the outcome regardless of execution order.
                if redraws > budget:
                    raise TooManyDegenerateResamples(
                        f"replicate {r} redrew {redraws} times "
                        f"(budget {budget} of {cfg.replicates})"
                    ) from None

    indices = range(cfg.replicates)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one_replicate, indices))
    else:
        outcomes = [one_replicate(r) for r in indices]

    values = np.array([v for v, _ in outcomes], dtype=np.float64)
    total_redraws = sum(rd for _, rd in outcomes)
    if total_redraws > budget:
        raise TooManyDegenerateResamples(
            f"{total_redraws} redraws over {cfg.replicates} replicates "
            f"(budget {budget})"
        )

    ordered = np.sort(values)
    k_lo, k_hi = _percentile_indices(cfg.replicates, cfg.level)
    return BootstrapResult(
        estimate=estimate,
        ci_low=float(ordered[k_lo]),
        ci_high=float(ordered[k_hi]),
        replicate_values=values,
        degenerate_redraws=total_redraws,
    )
