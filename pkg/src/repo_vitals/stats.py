"""Rank statistics: Mann-Whitney U, Kruskal-Wallis, Cliff's delta, Spearman rho."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.stats import chi2, norm, rankdata

from .errors import EmptySample, LengthMismatch, TooFewRows, ZeroVariance

Alternative = Literal["two_sided", "greater", "less"]

# |d| <= 0.147 negligible, < 0.33 small, < 0.474 medium, otherwise large.
NEGLIGIBLE_MAX = 0.147
SMALL_MAX = 0.33
MEDIUM_MAX = 0.474

# Exact Mann-Whitney null distribution up to this many pairs.
EXACT_MAX_PAIRS = 20


@dataclass(frozen=True)
class EffectSize:
    d: float
    magnitude: str


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    alternative: str = "two_sided"

    __test__ = False  # keep pytest from collecting this class


def magnitude(d: float) -> str:
    a = abs(d)
    if a <= NEGLIGIBLE_MAX:
        return "negligible"
    if a < SMALL_MAX:
        return "small"
    if a < MEDIUM_MAX:
        return "medium"
    return "large"


def _sample(x: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise EmptySample(f"{name} is empty")
    return arr


def average_ranks(x: np.ndarray) -> np.ndarray:
    return rankdata(x, method="average")


def _tie_term(pooled: np.ndarray) -> float:
    _, counts = np.unique(pooled, return_counts=True)
    return float(np.sum(counts.astype(np.float64) ** 3 - counts))


def u_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """U for sample ``a``: pairs where a wins plus half the ties."""
    a, b = _sample(a, "a"), _sample(b, "b")
    ranks = average_ranks(np.concatenate([a, b]))
    n = a.size
    return float(ranks[:n].sum() - n * (n + 1) / 2)


def mann_whitney_u(a: Sequence[float], b: Sequence[float], alternative: Alternative = "two_sided") -> TestResult:
    """Mann-Whitney U test; ``greater`` means ``a`` tends to exceed ``b``.

    Exact enumeration of the (tie-aware) null distribution when
    ``len(a) * len(b) <= 20``; otherwise the normal approximation with tie
    correction and a 0.5 continuity correction.
    """
    if alternative not in ("two_sided", "greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    a, b = _sample(a, "a"), _sample(b, "b")
    n, m = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = average_ranks(pooled)
    u = float(ranks[:n].sum() - n * (n + 1) / 2)

    if n * m <= EXACT_MAX_PAIRS:
        p_ge, p_le = _exact_tails(ranks, n, u)
    else:
        mean = n * m / 2.0
        N = n + m
        var = n * m / 12.0 * ((N + 1) - _tie_term(pooled) / (N * (N - 1)))
        if var <= 0:
            return TestResult(u, 1.0, alternative)
        sd = math.sqrt(var)
        p_ge = float(norm.sf((u - mean - 0.5) / sd))
        p_le = float(norm.cdf((u - mean + 0.5) / sd))
        if alternative == "two_sided":
            z = (abs(u - mean) - 0.5) / sd
            return TestResult(u, float(min(1.0, 2 * norm.sf(max(z, 0.0)))), alternative)

    if alternative == "greater":
        p = p_ge
    elif alternative == "less":
        p = p_le
    else:
        p = 2 * min(p_ge, p_le)
    return TestResult(u, float(min(1.0, max(0.0, p))), alternative)


def _exact_tails(ranks: np.ndarray, n: int, u_obs: float) -> tuple[float, float]:
    N = ranks.size
    offset = n * (n + 1) / 2
    us = np.array([ranks[list(c)].sum() - offset for c in itertools.combinations(range(N), n)])
    eps = 1e-9
    return float(np.mean(us >= u_obs - eps)), float(np.mean(us <= u_obs + eps))


def cliffs_delta(a: Sequence[float], b: Sequence[float]) -> EffectSize:
    """d = (#(a_i > b_j) - #(a_i < b_j)) / (n m)."""
    a, b = _sample(a, "a"), _sample(b, "b")
    sb = np.sort(b)
    greater = np.searchsorted(sb, a, side="left").sum()
    less = (b.size - np.searchsorted(sb, a, side="right")).sum()
    d = int(greater - less) / (a.size * b.size)
    return EffectSize(d, magnitude(d))


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> TestResult:
    """H statistic with tie correction; p from chi-square with g-1 dof."""
    if len(groups) < 2:
        raise EmptySample("need at least two groups")
    samples = [_sample(g, f"group {i}") for i, g in enumerate(groups)]
    pooled = np.concatenate(samples)
    N = pooled.size
    ranks = average_ranks(pooled)
    correction = 1.0 - _tie_term(pooled) / (N**3 - N) if N > 1 else 0.0
    if correction <= 0:
        return TestResult(0.0, 1.0)
    h = 0.0
    start = 0
    for s in samples:
        r = ranks[start : start + s.size]
        h += r.sum() ** 2 / s.size
        start += s.size
    h = (12.0 / (N * (N + 1)) * h - 3 * (N + 1)) / correction
    h = max(h, 0.0)
    return TestResult(float(h), float(chi2.sf(h, len(samples) - 1)))


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths differ: {x.size} vs {y.size}")
    if x.size < 3:
        raise TooFewRows("spearman_rho needs at least 3 observations")
    rx, ry = average_ranks(x), average_ranks(y)
    rx, ry = rx - rx.mean(), ry - ry.mean()
    den = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if den == 0:
        raise ZeroVariance("a sample is constant")
    return float(np.clip(float(rx @ ry) / den, -1.0, 1.0))
