import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedback_arq.blep import BlepModel, conditional_attempt_blep, cumulative_blep, sample_decode


def test_equal_gain_attempts_are_identical():
    assert BlepModel(0.1, 1.0, 4).conditional_attempt_blep(3) == pytest.approx(0.1, rel=1e-15)


def test_combining_gain_second_attempt():
    ref = float(mpmath.power(mpmath.mpf("0.1"), mpmath.mpf("1.2")))
    assert BlepModel(0.1, 1.2, 4).conditional_attempt_blep(2) == pytest.approx(ref, rel=1e-13)
    assert ref == pytest.approx(6.3096e-2, rel=1e-4)


def test_certain_failure_is_fixed_point():
    m = BlepModel(1.0, 1.2, 4)
    assert m.conditional_attempt_blep(4) == 1.0
    assert m.cumulative_blep(4) == 1.0


@pytest.mark.parametrize("g, expected", [(1.0, 1e-4), (1.2, 0.1 ** (1 + 1.2 + 1.44 + 1.728))])
def test_cumulative_floor(g, expected):
    assert BlepModel(0.1, g, 4).cumulative_blep(4) == pytest.approx(expected, rel=1e-12)


def test_cumulative_zero_attempts_is_one():
    assert BlepModel(0.3, 1.0, 4).cumulative_blep(0) == 1.0


def test_module_wrappers_match_methods():
    m = BlepModel(0.2, 1.5, 5)
    assert conditional_attempt_blep(m, 3) == m.conditional_attempt_blep(3)
    assert cumulative_blep(m, 5) == m.cumulative_blep(5)


def test_tables_line_up():
    m = BlepModel(0.2, 1.3, 5)
    cond, cum = m.conditional_table(), m.cumulative_table()
    assert cond.shape == (6,) and cum.shape == (6,)
    assert cum[0] == 1.0
    np.testing.assert_allclose(cum[1:], np.cumprod(cond[1:]), rtol=1e-13)


@pytest.mark.parametrize(
    "kwargs",
    [dict(eps=-0.1), dict(eps=1.1), dict(eps=0.1, g=0.5), dict(eps=0.1, max_attempts=0), dict(eps=float("nan"))],
)
def test_invalid_models_rejected(kwargs):
    with pytest.raises(ValueError):
        BlepModel(**kwargs)


def test_attempt_index_range_checked():
    m = BlepModel(0.1, 1.0, 3)
    with pytest.raises(ValueError):
        m.conditional_attempt_blep(0)
    with pytest.raises(ValueError):
        m.conditional_attempt_blep(4)
    with pytest.raises(ValueError):
        m.cumulative_blep(-1)


@settings(max_examples=200, deadline=None)
@given(
    eps=st.floats(1e-6, 0.999),
    g=st.floats(1.0, 3.0),
    M=st.integers(1, 12),
)
def test_cumulative_matches_high_precision(eps, g, M):
    m = BlepModel(eps, g, M)
    with mpmath.workdps(40):
        ref = mpmath.power(mpmath.mpf(eps), sum(mpmath.mpf(g) ** j for j in range(M)))
    assert m.cumulative_blep(M) == pytest.approx(float(ref), rel=1e-11, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(eps=st.floats(0.0, 1.0), g=st.floats(1.0, 3.0), M=st.integers(1, 10))
def test_cumulative_non_increasing_and_bounded(eps, g, M):
    cum = BlepModel(eps, g, M).cumulative_table()
    assert np.all(cum >= 0) and np.all(cum <= 1)
    assert np.all(np.diff(cum) <= 1e-15)


@settings(max_examples=100, deadline=None)
@given(eps=st.floats(0.01, 0.99), M=st.integers(2, 8), g1=st.floats(1.0, 2.0), dg=st.floats(0.0, 1.0))
def test_more_gain_never_hurts(eps, M, g1, dg):
    a = BlepModel(eps, g1, M).cumulative_blep(M)
    b = BlepModel(eps, g1 + dg, M).cumulative_blep(M)
    assert b <= a * (1 + 1e-12)


def test_sample_decode_trivial_cases():
    rng = np.random.default_rng(0)
    assert all(BlepModel(0.0, 1.0, 2).sample_decode(1, rng) for _ in range(1000))
    assert not any(BlepModel(1.0, 1.0, 2).sample_decode(2, rng) for _ in range(1000))


def test_sample_decode_frequency():
    m = BlepModel(0.1, 1.0, 1)
    rng = np.random.default_rng(42)
    n = 10**6
    hits = sum(sample_decode(m, 1, rng) for _ in range(n))
    sigma = math.sqrt(0.9 * 0.1 / n)
    assert abs(hits / n - 0.9) < 3 * sigma


def test_sample_decode_draws_one_uniform():
    m = BlepModel(0.3, 1.0, 1)
    a, b = np.random.default_rng(5), np.random.default_rng(5)
    got = [m.sample_decode(1, a) for _ in range(50)]
    assert got == list(b.random(50) >= 0.3)
