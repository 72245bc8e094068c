import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vsr_snca.errors import InvalidSample
from vsr_snca.stats import mann_whitney_u, vibration_metric


def brute_force_p(a, b):
    """Two-sided p by enumerating every split of the pooled ranks."""
    pooled = np.concatenate([a, b])
    ranks = np.argsort(np.argsort(pooled)) + 1
    n, m = len(a), len(b)
    offset = n * (n + 1) // 2
    u_obs = int(ranks[:n].sum()) - offset
    centre = Fraction(n * m, 2)
    dev = abs(u_obs - centre)
    hits = total = 0
    for combo in itertools.combinations(range(1, n + m + 1), n):
        u = sum(combo) - offset
        hits += abs(u - centre) >= dev
        total += 1
    return float(Fraction(hits, total))


def test_three_by_three():
    r = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert r.u == 0 and r.p == 0.1 and r.method == "exact"


def test_identical_samples():
    assert mann_whitney_u([1, 2, 3, 4], [1, 2, 3, 4]).p == 1.0


def test_disjoint_tens():
    r = mann_whitney_u(range(1, 11), range(11, 21))
    assert r.u == 0 and r.p < 0.01


@pytest.mark.parametrize("n,m", [(1, 1), (2, 5), (4, 4), (5, 7), (3, 12)])
def test_exact_matches_enumeration(n, m):
    rng = np.random.default_rng(n * 100 + m)
    for _ in range(3):
        x = rng.permutation(n + m).astype(float)
        r = mann_whitney_u(x[:n], x[n:])
        assert r.p == pytest.approx(brute_force_p(x[:n], x[n:]), abs=1e-12)


def test_u_range_and_complement():
    a, b = [0.1, 5.0, 2.2], [1.0, 3.0, 4.0, 6.0]
    assert mann_whitney_u(a, b).u + mann_whitney_u(b, a).u == 12


def test_ties_use_normal_branch():
    r = mann_whitney_u([1, 2, 2, 3], [2, 3, 4, 5])
    assert r.method == "normal" and 0 <= r.p <= 1


def test_large_uses_normal_branch():
    r = mann_whitney_u(np.arange(20.0), np.arange(20.0) + 0.5)
    assert r.method == "normal"


def test_branches_agree_at_8x8():
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.normal(size=16)
        x[8:] += rng.uniform(0, 2)
        exact = mann_whitney_u(x[:8], x[8:])
        assert exact.method == "exact"
        from vsr_snca import stats
        old = stats.EXACT_LIMIT
        stats.EXACT_LIMIT = 0
        try:
            approx = mann_whitney_u(x[:8], x[8:])
        finally:
            stats.EXACT_LIMIT = old
        assert abs(exact.p - approx.p) < 0.02


def test_empty_sample():
    with pytest.raises(InvalidSample):
        mann_whitney_u([], [1.0])


samples = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=9)


@settings(max_examples=200, deadline=None)
@given(samples, samples)
def test_symmetry(a, b):
    assert mann_whitney_u(a, b).p == pytest.approx(mann_whitney_u(b, a).p, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=1, max_size=9),
       st.lists(st.integers(-50, 50), min_size=1, max_size=9), st.integers(-1000, 1000))
def test_shift_invariance(a, b, shift):
    r0 = mann_whitney_u(a, b)
    r1 = mann_whitney_u(np.add(a, shift), np.add(b, shift))
    assert (r0.u, r0.p) == (r1.u, r1.p)


def test_vibration_tone():
    t = np.arange(600) / 60.0
    assert vibration_metric(np.sin(2 * np.pi * 10 * t)) == pytest.approx(10.0, abs=0.1)


def test_vibration_constant():
    assert vibration_metric(np.full(300, 0.4)) == 0.0


def test_vibration_alternating():
    assert vibration_metric(np.tile([1.0, -1.0], 200)) == 30.0


def test_vibration_averages_voxels():
    t = np.arange(512) / 60.0
    tone = np.sin(2 * np.pi * 4 * t)
    trace = np.stack([tone, tone, -0.2 * tone], axis=1)
    assert vibration_metric(trace) == pytest.approx(4.0, abs=60 / 512)


def test_vibration_short_trace():
    with pytest.raises(InvalidSample):
        vibration_metric(np.zeros(100))


@pytest.mark.parametrize("seed", range(5))
def test_against_scipy(seed):
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 8, 9).astype(float)  # heavy ties: normal branch
    b = rng.integers(2, 10, 11).astype(float)
    ours = mann_whitney_u(a, b)
    ref = scipy_stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic")
    assert ours.method == "normal"
    assert ours.u == ref.statistic and ours.p == pytest.approx(ref.pvalue, rel=1e-9)
    x = rng.permutation(13).astype(float)
    exact = scipy_stats.mannwhitneyu(x[:6], x[6:], alternative="two-sided", method="exact")
    assert mann_whitney_u(x[:6], x[6:]).p == pytest.approx(exact.pvalue, rel=1e-12)
