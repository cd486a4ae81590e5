"""Kruskal-Wallis rank test with tie correction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from scipy.stats import chi2, rankdata


@dataclass(frozen=True)
class GroupTestResult:
    statistic: float
    degrees_of_freedom: int
    p_value: float
    group_sizes: tuple[int, ...]


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> GroupTestResult:
    """Rank-sum H statistic across two or more groups.

    H is tie-corrected; the p-value is the chi-square survival function at
    H with #groups - 1 degrees of freedom.
    """
    if len(groups) < 2:
        raise ValueError(f"need at least 2 groups, got {len(groups)}")
    sizes = tuple(len(g) for g in groups)
    if any(size == 0 for size in sizes):
        raise ValueError("every group must be non-empty")
    pooled = [float(v) for group in groups for v in group]
    total = len(pooled)
    ranks = rankdata(pooled)
    h = 0.0
    offset = 0
    for size in sizes:
        rank_sum = float(sum(ranks[offset : offset + size]))
        h += rank_sum * rank_sum / size
        offset += size
    h = 12.0 / (total * (total + 1)) * h - 3.0 * (total + 1)

    tie_counts: dict[float, int] = {}
    for value in pooled:
        tie_counts[value] = tie_counts.get(value, 0) + 1
    correction = 1.0 - sum(t**3 - t for t in tie_counts.values()) / (total**3 - total)
    if correction > 0:
        h /= correction
    h = max(h, 0.0)

    df = len(groups) - 1
    p_value = float(chi2.sf(h, df))
    return GroupTestResult(h, df, p_value, sizes)
