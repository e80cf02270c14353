from collections.abc import Sequence
from itertools import combinations

import numpy as np
import pandas as pd

from myoselect.domain.evaluation.statistics import average_ranks, holm_adjust, wilcoxon_signed_rank
from myoselect.errors import StatisticsError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.analysis")

BAC_COLUMNS = ["method", "k_spec", "snr_db", "repeat", "fold", "bac"]
RANKS_BY_K_COLUMNS = ["scope", "method", "k_spec", "avg_rank"]
RANKS_BY_SNR_COLUMNS = ["k_spec", "snr_db", "method", "avg_rank"]
PVALUE_COLUMNS = [
    "analysis",
    "group",
    "alt_a",
    "alt_b",
    "statistic",
    "p_raw",
    "p_holm",
    "reject",
    "median_diff",
    "flag",
]

# Methods whose result depends on the channel-subset size
K_DEPENDENT_METHODS = ("Or", "Fu", "DO")


def _ordered(values: Sequence[str], preferred: Sequence[str]) -> list[str]:
    present = list(dict.fromkeys(values))
    known = [v for v in preferred if v in present]
    return known + sorted(v for v in present if v not in known)


def _wide(frame: pd.DataFrame, index: list[str], column: str, order: list[str]) -> pd.DataFrame:
    table = frame.pivot_table(index=index, columns=column, values="bac", aggfunc="first")
    return table.reindex(columns=order).dropna()


def ranks_by_k(bac: pd.DataFrame, k_order: Sequence[str], snr_scopes: bool = True) -> pd.DataFrame:
    """
    Average rank of every k spec per K-dependent method.

    Groups are (snr, repeat, fold) cells for scope "all", and (repeat, fold) cells for each "snr:<v>" scope.
    The best k spec gets the highest rank.

    Args:
        bac (pd.DataFrame): Long-form balanced accuracies with BAC_COLUMNS.
        k_order (Sequence[str]): K spec labels in report order.
        snr_scopes (bool): Also emit per-SNR scopes.

    Returns:
        pd.DataFrame: Rows (scope, method, k_spec, avg_rank).
    """
    rows = []
    methods = [m for m in K_DEPENDENT_METHODS if m in set(bac["method"])]
    order = _ordered(bac["k_spec"], k_order)
    scopes: list[tuple[str, pd.DataFrame]] = [("all", bac)]
    if snr_scopes:
        scopes += [(f"snr:{snr:g}", part) for snr, part in bac.groupby("snr_db", sort=True)]
    for scope, part in scopes:
        for method in methods:
            wide = _wide(part[part["method"] == method], ["snr_db", "repeat", "fold"], "k_spec", order)
            if wide.empty:
                continue
            for k_spec, rank in zip(order, average_ranks(wide.to_numpy()), strict=True):
                rows.append({"scope": scope, "method": method, "k_spec": k_spec, "avg_rank": float(rank)})
    return pd.DataFrame(rows, columns=RANKS_BY_K_COLUMNS)


def ranks_by_snr(bac: pd.DataFrame, method_order: Sequence[str], k_order: Sequence[str]) -> pd.DataFrame:
    """
    Average rank of every method per (k spec, SNR), over (repeat, fold) cells.

    Returns:
        pd.DataFrame: Rows (k_spec, snr_db, method, avg_rank).
    """
    rows = []
    methods = _ordered(bac["method"], method_order)
    for k_spec in _ordered(bac["k_spec"], k_order):
        by_k = bac[bac["k_spec"] == k_spec]
        for snr, part in by_k.groupby("snr_db", sort=True):
            wide = _wide(part, ["repeat", "fold"], "method", methods)
            if wide.empty:
                continue
            for method, rank in zip(methods, average_ranks(wide.to_numpy()), strict=True):
                rows.append({"k_spec": k_spec, "snr_db": float(snr), "method": method, "avg_rank": float(rank)})
    return pd.DataFrame(rows, columns=RANKS_BY_SNR_COLUMNS)


def pairwise_tests(analysis: str, group: str, wide: pd.DataFrame, alpha: float) -> list[dict]:
    """
    Two-sided Wilcoxon tests of every column pair of a wide score table, Holm-adjusted within the group.

    Pairs with too few non-zero differences get p = 1 and the flag "insufficient_sample".
    """
    results = []
    for alt_a, alt_b in combinations(wide.columns, 2):
        a, b = wide[alt_a].to_numpy(), wide[alt_b].to_numpy()
        try:
            test = wilcoxon_signed_rank(a, b)
            statistic, p_raw, flag, median = test.statistic, test.p_value, test.flag, test.median_diff
        except StatisticsError as e:
            logger.debug(f"{analysis} {group}: {alt_a} vs {alt_b} untestable ({e}).")
            statistic, p_raw, flag, median = float("nan"), 1.0, "insufficient_sample", float(np.median(a - b))
        results.append(
            {
                "analysis": analysis,
                "group": group,
                "alt_a": str(alt_a),
                "alt_b": str(alt_b),
                "statistic": statistic,
                "p_raw": p_raw,
                "median_diff": median,
                "flag": flag,
            }
        )
    if results:
        holm = holm_adjust([r["p_raw"] for r in results], alpha)
        for row, adjusted, reject in zip(results, holm.adjusted, holm.reject, strict=True):
            row["p_holm"] = float(adjusted)
            row["reject"] = bool(reject)
    return results


def pvalue_table(bac: pd.DataFrame, method_order: Sequence[str], k_order: Sequence[str], alpha: float) -> pd.DataFrame:
    """
    Pairwise tests between methods per (k spec, SNR) and between k specs per K-dependent method.

    Returns:
        pd.DataFrame: Rows with PVALUE_COLUMNS; `median_diff` is the median of alt_a - alt_b.
    """
    rows: list[dict] = []
    methods = _ordered(bac["method"], method_order)
    k_specs = _ordered(bac["k_spec"], k_order)
    for k_spec in k_specs:
        by_k = bac[bac["k_spec"] == k_spec]
        for snr, part in by_k.groupby("snr_db", sort=True):
            wide = _wide(part, ["repeat", "fold"], "method", methods)
            rows += pairwise_tests("methods", f"k={k_spec}|snr={snr:g}", wide, alpha)
    if len(k_specs) > 1:
        for method in [m for m in K_DEPENDENT_METHODS if m in methods]:
            wide = _wide(bac[bac["method"] == method], ["snr_db", "repeat", "fold"], "k_spec", k_specs)
            rows += pairwise_tests("k", f"method={method}", wide, alpha)
    return pd.DataFrame(rows, columns=PVALUE_COLUMNS)


def box_statistics(values: np.ndarray) -> dict[str, float]:
    """Five-number summary plus mean, with linear-interpolated quartiles."""
    q = np.percentile(values, [0, 25, 50, 75, 100])
    return {
        "min": float(q[0]),
        "q1": float(q[1]),
        "median": float(q[2]),
        "q3": float(q[3]),
        "max": float(q[4]),
        "mean": float(np.mean(values)),
    }
