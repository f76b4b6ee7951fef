import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgt.ttest import student_t_cdf, t_test_p

from conftest import student_t_cdf_quad


def test_zero_mean_gives_half():
    assert t_test_p(0.0, 1.0, 50) == pytest.approx(0.5, abs=1e-15)


def test_anchor_n11():
    # t = -2.228 with 10 degrees of freedom is the 2.5% quantile
    s = 1.0
    mean = -2.228 * s / math.sqrt(11)
    assert t_test_p(mean, s * s, 11) == pytest.approx(0.025, abs=1e-3)


def test_degenerate_inputs():
    assert t_test_p(-1.0, 1.0, 1) == 1.0
    assert t_test_p(-1.0, 1.0, 0) == 1.0
    assert t_test_p(-0.5, 0.0, 10) == 0.0
    assert t_test_p(0.0, 0.0, 10) == 1.0
    assert t_test_p(0.5, 0.0, 10) == 1.0


def test_two_sided():
    one = t_test_p(-0.3, 1.0, 30)
    assert t_test_p(-0.3, 1.0, 30, two_sided=True) == pytest.approx(2 * one, rel=1e-12)
    assert t_test_p(0.3, 1.0, 30, two_sided=True) == pytest.approx(2 * one, rel=1e-12)
    assert t_test_p(0.0, 1.0, 30, two_sided=True) == pytest.approx(1.0)


@pytest.mark.parametrize("df", [1, 2, 5, 10, 30, 100, 1000, 10000])
@pytest.mark.parametrize("t", [-10, -3, -1, -0.1, 0, 0.5, 2, 8])
def test_cdf_matches_quadrature(df, t):
    assert abs(student_t_cdf(t, df) - student_t_cdf_quad(t, df)) <= 1e-9


def test_cdf_cauchy_closed_form():
    for t in (-5.0, -1.0, 0.3, 4.0):
        assert student_t_cdf(t, 1) == pytest.approx(0.5 + math.atan(t) / math.pi, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, -1e-3), st.floats(0.1, 10), st.integers(2, 500))
def test_p_decreases_with_n(mean, sd, n):
    assert t_test_p(mean, sd * sd, n + 1) <= t_test_p(mean, sd * sd, n) + 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.integers(1, 2000))
def test_cdf_is_monotone_in_t(a, b, df):
    lo, hi = sorted((a, b))
    assert student_t_cdf(lo, df) <= student_t_cdf(hi, df) + 1e-15
