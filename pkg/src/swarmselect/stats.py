"""Wilcoxon signed-rank test for paired scores."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

__all__ = ["TestResult", "DegeneratePairingError", "wilcoxon_signed_rank", "exact_null_counts", "EXACT_MAX_N"]

EXACT_MAX_N = 25
MIN_PAIRS = 5


class DegeneratePairingError(ValueError):
    """Too few non-zero paired differences for the test to mean anything."""


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    w_plus: float
    w_minus: float
    n: int
    method: str

    __test__ = False  # keep pytest from collecting this class

    @property
    def significant_at_5pct(self) -> bool:
        return self.p_value < 0.05


def exact_null_counts(doubled_ranks) -> np.ndarray:
    """Number of sign assignments giving each value of ``2 * W+``.

    Counting by dynamic programming over the (doubled, hence integer) ranks
    is equivalent to enumerating all ``2**n`` sign patterns.
    """
    ranks = [int(r) for r in doubled_ranks]
    counts = np.zeros(sum(ranks) + 1, dtype=np.int64)
    counts[0] = 1
    for r in ranks:
        counts[r:] += counts[:-r].copy()
    return counts


def wilcoxon_signed_rank(values_a, values_b, exact: bool | None = None) -> TestResult:
    """Two-sided Wilcoxon signed-rank test on ``a - b``.

    Zero differences are dropped and tied magnitudes get mid-ranks. The
    statistic is ``min(W+, W-)``. For up to 25 pairs the p-value comes from
    the exact permutation distribution; above that a normal approximation
    with continuity and tie correction is used. ``exact`` forces a branch.
    """
    a = np.asarray(values_a, dtype=float)
    b = np.asarray(values_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-d sequences of equal length")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise DegeneratePairingError("degenerate pairing: all differences are zero")
    if n < MIN_PAIRS:
        raise DegeneratePairingError(
            f"degenerate pairing: only {n} non-zero difference(s), at least {MIN_PAIRS} needed"
        )
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    statistic = min(w_plus, w_minus)
    use_exact = n <= EXACT_MAX_N if exact is None else exact

    if use_exact:
        counts = exact_null_counts(np.rint(2 * ranks))
        tail = counts[: int(round(2 * statistic)) + 1].sum()
        p = min(1.0, 2.0 * float(tail) / 2.0**n)
        method = "exact"
    else:
        mean = n * (n + 1) / 4.0
        _, tie_sizes = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_sizes**3 - tie_sizes) / 48.0
        z = (statistic - mean + 0.5) / math.sqrt(var)
        p = min(1.0, 2.0 * float(norm.cdf(z)))
        method = "normal"
    return TestResult(statistic, p, w_plus, w_minus, n, method)
