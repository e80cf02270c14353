import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

from myoselect.errors import StatisticsError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.statistics")

EXACT_MAX_N = 25
MIN_PAIRS = 5
ZERO_FLAG_FRACTION = 0.2


@dataclass(frozen=True)
class WilcoxonResult:
    """
    Outcome of a two-sided Wilcoxon signed-rank test.

    Attributes:
        statistic (float): W+, the rank sum of positive differences.
        p_value (float): Two-sided p-value.
        n_used (int): Non-zero differences kept.
        zeros_discarded (int): Zero differences dropped.
        median_diff (float): Median of a - b over all pairs.
        exact (bool): True if the exact null distribution was used.
        all_zero (bool): Every difference was zero; p is 1 by convention.
        many_zeros (bool): More than 20% of the differences were discarded.
    """

    statistic: float
    p_value: float
    n_used: int
    zeros_discarded: int
    median_diff: float
    exact: bool
    all_zero: bool = False
    many_zeros: bool = False

    @property
    def flag(self) -> str:
        if self.all_zero:
            return "all_zero"
        if self.many_zeros:
            return "zeros_discarded"
        return ""


@dataclass(frozen=True)
class HolmResult:
    adjusted: np.ndarray
    reject: np.ndarray


def _finite_matrix(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores[None, :]
    if scores.ndim != 2 or scores.shape[0] == 0 or scores.shape[1] == 0:
        raise StatisticsError(f"expected a non-empty [groups x alternatives] matrix, got shape {scores.shape}")
    if np.isnan(scores).any():
        raise StatisticsError("NaN score")
    return scores


def rank_matrix(scores: np.ndarray, higher_better: bool = True) -> np.ndarray:
    """Per-group ranks; the best alternative gets the highest rank, ties share the mean rank."""
    scores = _finite_matrix(scores)
    return rankdata(scores if higher_better else -scores, method="average", axis=1)


def average_ranks(scores: np.ndarray, higher_better: bool = True) -> np.ndarray:
    """
    Average rank of each alternative over groups.

    Args:
        scores (np.ndarray): [groups x alternatives] score matrix.
        higher_better (bool): Whether larger scores are better.

    Returns:
        np.ndarray: Mean rank per alternative, in [1, m].

    Raises:
        StatisticsError: On an empty matrix or a NaN score.
    """
    return rank_matrix(scores, higher_better).mean(axis=0)


def signed_rank_null_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    """
    Null distribution of 2W+ over the 2^n sign patterns.

    Args:
        doubled_ranks (np.ndarray): Twice the (average) ranks, as integers.

    Returns:
        np.ndarray: counts[s] = number of sign patterns with doubled positive rank sum s.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return counts


def _exact_p(ranks: np.ndarray, w_plus: float) -> float:
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    counts = signed_rank_null_counts(doubled)
    w2 = int(round(2.0 * w_plus))
    lower = int(counts[: w2 + 1].sum())
    upper = int(counts[w2:].sum())
    return min(1.0, 2 * min(lower, upper) / 2 ** ranks.size)


def _normal_p(ranks: np.ndarray, w_plus: float) -> float:
    n = ranks.size
    mean = n * (n + 1) / 4.0
    _, ties = np.unique(ranks, return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(ties**3 - ties)) / 48.0
    if variance <= 0.0:
        return 1.0
    z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(variance)
    return min(1.0, 2.0 * float(norm.sf(z)))


def wilcoxon_signed_rank(a: np.ndarray, b: np.ndarray) -> WilcoxonResult:
    """
    Two-sided Wilcoxon signed-rank test of paired samples.

    Zero differences are discarded. The p-value is exact for up to 25 remaining pairs (tied ranks included)
    and uses the normal approximation with tie and continuity corrections beyond.

    Args:
        a (np.ndarray): First paired sample.
        b (np.ndarray): Second paired sample.

    Returns:
        WilcoxonResult: Statistic, p-value and zero-handling flags.

    Raises:
        StatisticsError: On mismatched or empty samples, non-finite values, or fewer than 5 non-zero differences.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise StatisticsError(f"paired samples must be 1-D of equal length, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise StatisticsError("empty paired sample")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise StatisticsError("non-finite value in paired sample")

    diff = a - b
    median_diff = float(np.median(diff))
    nonzero = diff[diff != 0.0]
    zeros = diff.size - nonzero.size
    if nonzero.size == 0:
        return WilcoxonResult(0.0, 1.0, 0, zeros, median_diff, exact=True, all_zero=True, many_zeros=True)
    if nonzero.size < MIN_PAIRS:
        raise StatisticsError(f"insufficient sample: {nonzero.size} non-zero differences, need {MIN_PAIRS}")

    many_zeros = zeros > ZERO_FLAG_FRACTION * diff.size
    if many_zeros:
        logger.warning(f"Wilcoxon test discarded {zeros} of {diff.size} zero differences.")
    ranks = rankdata(np.abs(nonzero), method="average")
    w_plus = float(ranks[nonzero > 0.0].sum())
    exact = nonzero.size <= EXACT_MAX_N
    p_value = _exact_p(ranks, w_plus) if exact else _normal_p(ranks, w_plus)
    return WilcoxonResult(w_plus, p_value, int(nonzero.size), zeros, median_diff, exact=exact, many_zeros=many_zeros)


def holm_adjust(pvalues: np.ndarray | list[float], alpha: float = 0.05) -> HolmResult:
    """
    Holm step-down adjustment.

    adj_(i) = max_{j <= i} min(1, (m - j + 1) p_(j)) in ascending order, mapped back to input order.

    Args:
        pvalues (np.ndarray | list[float]): Raw p-values in [0, 1].
        alpha (float): Family-wise error rate.

    Returns:
        HolmResult: Adjusted p-values and reject flags (adjusted <= alpha).
    """
    p = np.asarray(pvalues, dtype=np.float64)
    if p.size and (np.isnan(p).any() or p.min() < 0.0 or p.max() > 1.0):
        raise StatisticsError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = np.minimum(1.0, (m - np.arange(m)) * p[order])
    adjusted = np.empty(m)
    adjusted[order] = np.maximum.accumulate(scaled) if m else scaled
    return HolmResult(adjusted=adjusted, reject=adjusted <= alpha)
