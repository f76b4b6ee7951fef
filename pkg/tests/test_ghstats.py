import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgt.ghstats import GradHessPair, GradHessStats, delta_loss_moments, merge, observe

from conftest import moments_close, two_pass

# tiny magnitudes are flushed to zero: their squares underflow, which says
# nothing about the accumulator
finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False).map(lambda x: 0.0 if abs(x) < 1e-100 else x)
pairs = st.lists(st.tuples(finite, finite), min_size=0, max_size=60)


def fold(obs):
    s = GradHessStats()
    for g, h in obs:
        s.observe(g, h)
    return s


def test_single_observation_has_zero_spread():
    s = observe(GradHessStats(), GradHessPair(1.0, 1.0))
    assert (s.n, s.mean_g, s.mean_h, s.m2_g, s.m2_h, s.c_gh) == (1, 1.0, 1.0, 0.0, 0.0, 0.0)


def test_two_points():
    s = fold([(1, 1), (2, 3)])
    assert s.mean_g == 1.5 and s.mean_h == 2.0
    assert s.var_g == pytest.approx(0.5, rel=1e-12)
    assert s.var_h == pytest.approx(2.0, rel=1e-12)
    assert s.cov_gh == pytest.approx(1.0, rel=1e-12)


def test_constant_sequence_is_exactly_flat():
    s = fold([(0.3, 0.7)] * 25)
    assert s.m2_g == 0.0 and s.m2_h == 0.0 and s.c_gh == 0.0


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        GradHessPair(float("nan"), 1.0)
    with pytest.raises(ValueError):
        GradHessStats().observe(1.0, float("inf"))


def test_observe_function_does_not_mutate():
    s = fold([(1, 1)])
    s2 = observe(s, GradHessPair(2, 3))
    assert s.n == 1 and s2.n == 2


def test_merge_matches_union():
    assert moments_close(merge(fold([(1, 1)]), fold([(2, 3)])), two_pass([1, 2], [1, 3]))


def test_merge_with_empty_is_identity():
    s = fold([(1, 2), (3, -1), (0.5, 0.25)])
    for m in (merge(s, GradHessStats()), merge(GradHessStats(), s)):
        assert m == s


def test_merge_associative_on_random_data():
    rng = np.random.default_rng(7)
    obs = list(zip(rng.normal(2, 3, 100), rng.gamma(2, 1, 100)))
    s1, s2, s3 = fold(obs[:30]), fold(obs[30:71]), fold(obs[71:])
    ref = two_pass(*zip(*obs))
    assert moments_close(merge(merge(s1, s2), s3), ref)
    assert moments_close(merge(s1, merge(s2, s3)), ref)


@settings(max_examples=300, deadline=None)
@given(pairs)
def test_fold_matches_two_pass(obs):
    s = fold(obs)
    ref = two_pass([g for g, _ in obs], [h for _, h in obs])
    assert moments_close(s, ref)


@settings(max_examples=300, deadline=None)
@given(pairs, st.integers(min_value=0, max_value=60))
def test_split_and_merge_matches_whole(obs, cut):
    cut = min(cut, len(obs))
    merged = merge(fold(obs[:cut]), fold(obs[cut:]))
    assert moments_close(merged, two_pass([g for g, _ in obs], [h for _, h in obs]))


@settings(max_examples=300, deadline=None)
@given(pairs, st.integers(min_value=0, max_value=60))
def test_cauchy_schwarz(obs, cut):
    cut = min(cut, len(obs))
    for s in (fold(obs), merge(fold(obs[:cut]), fold(obs[cut:]))):
        assert s.m2_g >= 0 and s.m2_h >= 0
        bound = math.sqrt(s.m2_g * s.m2_h)
        assert abs(s.c_gh) <= bound + 1e-9 * max(1.0, bound)


def test_delta_loss_moments_examples():
    s = fold([(1, 1), (2, 3)])
    assert delta_loss_moments(s, 0.0) == (0.0, 0.0)
    mean, var = delta_loss_moments(s, -0.5)
    assert mean == pytest.approx(-0.5, abs=1e-15)
    assert var == pytest.approx(0.03125, rel=1e-12)
    _, var1 = delta_loss_moments(s, 1.0)
    assert var1 == pytest.approx(s.var_g + 0.25 * s.var_h + s.cov_gh, rel=1e-12)


def test_delta_loss_moments_small_n():
    assert delta_loss_moments(GradHessStats(), 0.7) == (0.0, 0.0)
    mean, var = delta_loss_moments(fold([(2.0, 1.0)]), 0.5)
    assert mean == pytest.approx(1.125) and var == 0.0


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=60),
       st.floats(min_value=-10, max_value=10, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-3))
def test_delta_loss_variance_equals_explicit_sample_variance(obs, v):
    g = np.array([o[0] for o in obs])
    h = np.array([o[1] for o in obs])
    L = g * v + 0.5 * h * v * v
    mean, var = fold(obs).delta_loss_moments(v)
    ref_mean = math.fsum(L) / len(L)
    ref_var = math.fsum((L - ref_mean) ** 2) / (len(L) - 1)
    # scale of the three expanded terms, for values where they cancel
    scale = v * v * np.var(g, ddof=1) + 0.25 * v ** 4 * np.var(h, ddof=1) + abs(v) ** 3 * np.sqrt(
        np.var(g, ddof=1) * np.var(h, ddof=1))
    assert abs(mean - ref_mean) <= 1e-9 * max(abs(ref_mean), np.abs(L).max(), 1e-300)
    assert abs(var - ref_var) <= 1e-9 * max(ref_var, scale, 1e-300)
