import itertools

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from repo_vitals.errors import EmptySample, LengthMismatch, TooFewRows, ZeroVariance
from repo_vitals.stats import (
    cliffs_delta,
    kruskal_wallis,
    magnitude,
    mann_whitney_u,
    spearman_rho,
    u_statistic,
)


def brute_u(a, b):
    return sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in a for y in b)


def brute_delta(a, b):
    wins = sum(x > y for x in a for y in b)
    losses = sum(x < y for x in a for y in b)
    return (wins - losses) / (len(a) * len(b))


def brute_exact_p(a, b, alternative):
    """Permutation distribution of the pair-count U over all relabelings."""
    pooled = list(a) + list(b)
    n = len(a)
    u_obs = brute_u(a, b)
    us = []
    for idx in itertools.combinations(range(len(pooled)), n):
        chosen = [pooled[i] for i in idx]
        rest = [pooled[i] for i in range(len(pooled)) if i not in idx]
        us.append(brute_u(chosen, rest))
    us = np.array(us)
    ge, le = np.mean(us >= u_obs - 1e-9), np.mean(us <= u_obs + 1e-9)
    return {"greater": ge, "less": le, "two_sided": min(1.0, 2 * min(ge, le))}[alternative]


samples = st.lists(st.integers(-5, 5), min_size=1, max_size=12)


class TestMannWhitney:
    def test_identical_samples(self):
        r = mann_whitney_u([1, 2, 3, 4], [1, 2, 3, 4])
        assert r.statistic == 8.0

    def test_total_dominance(self):
        r = mann_whitney_u([10, 11, 12, 13, 14], [1, 2, 3, 4, 5], "greater")
        assert r.statistic == 25.0
        assert r.p_value < 0.01

    def test_pair_count_example(self):
        # 1 win (3>2) ... enumerated: wins 3>2; ties (2,2),(3,3) -> 1 + 2*0.5
        assert brute_u([1, 2, 3], [2, 3, 4]) == 2.0
        assert mann_whitney_u([1, 2, 3], [2, 3, 4]).statistic == 2.0

    @settings(max_examples=60, deadline=None)
    @given(a=st.lists(st.integers(0, 4), min_size=1, max_size=4), b=st.lists(st.integers(0, 4), min_size=1, max_size=5))
    def test_exact_p_matches_enumeration(self, a, b):
        if len(a) * len(b) > 20:
            return
        for alt in ("two_sided", "greater", "less"):
            assert mann_whitney_u(a, b, alt).p_value == pytest.approx(brute_exact_p(a, b, alt), abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_normal_approximation_matches_scipy(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.integers(0, 8, 15), rng.integers(1, 9, 12)
        for alt, sp_alt in (("two_sided", "two-sided"), ("greater", "greater"), ("less", "less")):
            ours = mann_whitney_u(a, b, alt)
            ref = scipy.stats.mannwhitneyu(a, b, alternative=sp_alt, method="asymptotic", use_continuity=True)
            assert ours.statistic == pytest.approx(ref.statistic)
            assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-12)

    def test_empty(self):
        with pytest.raises(EmptySample):
            mann_whitney_u([], [1])

    @settings(max_examples=80, deadline=None)
    @given(a=samples, b=samples)
    def test_u_equals_pair_count(self, a, b):
        assert u_statistic(a, b) == pytest.approx(brute_u(a, b), abs=1e-9)
        assert 0 <= mann_whitney_u(a, b).p_value <= 1


class TestCliffsDelta:
    def test_identical(self):
        e = cliffs_delta([1, 2, 3], [1, 2, 3])
        assert e.d == 0 and e.magnitude == "negligible"

    def test_dominance(self):
        e = cliffs_delta([4, 5, 6], [1, 2, 3])
        assert e.d == 1 and e.magnitude == "large"

    @pytest.mark.parametrize(
        "d,label",
        [(0.0, "negligible"), (0.147, "negligible"), (0.1471, "small"), (0.26, "small"), (0.33, "medium"),
         (0.4739, "medium"), (0.474, "large"), (-0.3, "small"), (-1.0, "large")],
    )
    def test_bands(self, d, label):
        assert magnitude(d) == label

    @settings(max_examples=80, deadline=None)
    @given(a=samples, b=samples)
    def test_brute_force_and_identities(self, a, b):
        d = cliffs_delta(a, b).d
        assert d == pytest.approx(brute_delta(a, b), abs=1e-12)
        assert cliffs_delta(b, a).d == -d
        assert abs(d) <= 1
        assert d == pytest.approx(2 * brute_u(a, b) / (len(a) * len(b)) - 1, abs=1e-12)

    def test_empty(self):
        with pytest.raises(EmptySample):
            cliffs_delta([1], [])


class TestKruskalWallis:
    def test_constant_groups(self):
        r = kruskal_wallis([[2, 2], [2, 2, 2], [2]])
        assert (r.statistic, r.p_value) == (0.0, 1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_scipy(self, seed):
        rng = np.random.default_rng(seed)
        groups = [rng.integers(0, 6, n) for n in (7, 9, 11)]
        ours = kruskal_wallis(groups)
        ref = scipy.stats.kruskal(*groups)
        assert ours.statistic == pytest.approx(ref.statistic, rel=1e-12)
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)

    def test_separated_groups_against_permutation_oracle(self):
        rng = np.random.default_rng(0)
        groups = [rng.normal(mu, 1.0, 10) for mu in (0, 5, 10)]
        h = kruskal_wallis(groups)
        assert h.p_value <= 0.05
        pooled = np.concatenate(groups)
        exceed = 0
        for _ in range(10_000):
            perm = rng.permutation(pooled)
            if kruskal_wallis([perm[:10], perm[10:20], perm[20:]]).statistic >= h.statistic - 1e-12:
                exceed += 1
        assert (exceed + 1) / 10_001 <= 0.05

    def test_two_groups_agree_with_mann_whitney_decision(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            shift = rng.uniform(0, 1.5)
            a, b = rng.normal(0, 1, 25), rng.normal(shift, 1, 25)
            kw = kruskal_wallis([a, b]).p_value <= 0.05
            mw = mann_whitney_u(a, b).p_value <= 0.05
            assert kw == mw

    def test_needs_two_groups(self):
        with pytest.raises(EmptySample):
            kruskal_wallis([[1, 2]])
        with pytest.raises(EmptySample):
            kruskal_wallis([[1, 2], []])


class TestSpearman:
    def test_monotone(self):
        assert spearman_rho([1, 2, 3, 4, 5], [1, 4, 9, 16, 25]) == 1.0

    def test_reversed(self):
        assert spearman_rho([1, 2, 3, 4], [8, 6, 4, 2]) == -1.0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_scipy(self, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.integers(0, 5, 30), rng.integers(0, 5, 30)
        assert spearman_rho(x, y) == pytest.approx(scipy.stats.spearmanr(x, y).statistic, abs=1e-12)

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            spearman_rho([1, 2, 3], [1, 2])
        with pytest.raises(TooFewRows):
            spearman_rho([1, 2], [1, 2])
        with pytest.raises(ZeroVariance):
            spearman_rho([1, 1, 1], [1, 2, 3])


@settings(max_examples=50, deadline=None)
@given(
    a=st.lists(st.integers(-20, 20), min_size=3, max_size=10),
    b=st.lists(st.integers(-20, 20), min_size=3, max_size=10),
)
def test_rank_statistics_invariant_under_monotone_transform(a, b):
    f = lambda v: [x**3 + 7 for x in v]  # noqa: E731 - strictly increasing
    assert u_statistic(f(a), f(b)) == u_statistic(a, b)
    assert mann_whitney_u(f(a), f(b)).p_value == pytest.approx(mann_whitney_u(a, b).p_value)
    assert cliffs_delta(f(a), f(b)).d == cliffs_delta(a, b).d
    assert kruskal_wallis([f(a), f(b)]).statistic == pytest.approx(kruskal_wallis([a, b]).statistic)
    if len(a) == len(b) and len(set(a)) > 1 and len(set(b)) > 1:
        assert spearman_rho(f(a), f(b)) == pytest.approx(spearman_rho(a, b))
