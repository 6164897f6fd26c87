import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from bkappa import core

finite = st.floats(-50, 50, allow_nan=False)
pos_kappa = st.floats(1e-3, 1e3)


@pytest.mark.parametrize(
    "x, y, expected",
    [(0.2, 0.5, 1.0), (3.0, 0.5, 0.0), (0.5, 0.5, 0.5), (0, 0.5, 1.0), (1, 0.5, 0.0),
     (0.2, -0.5, -1.0), (0.5, -0.5, -0.5), (1.0, 0.0, 0.0)],
)
def test_b_function_values(x, y, expected):
    assert core.b_function(x, y) == expected


def test_b_function_kronecker_on_integers():
    for j in range(-5, 6):
        assert core.b_function(j, 0.5) == (1.0 if j == 0 else 0.0)


def test_b_kappa_reference_values():
    assert core.b_kappa(0, 0.5, 1.0) == pytest.approx(0.4621171572600098, abs=1e-15)
    assert core.b_kappa(0, 0.5, 0.0) == 1.0
    assert core.b_kappa(0, 0.5, math.inf) == 0.0
    k = 1e6
    assert abs(k * core.b_kappa(7, 0.5, k) / 0.5 - 1) <= 1e-9


def test_b_kappa_matches_high_precision():
    for x, y, k in [(0.3, 0.5, 0.7), (2.0, 1.5, 3.0), (-4.0, 0.25, 0.01)]:
        ref = (mpmath.tanh(mpmath.mpf(x + y) / k) - mpmath.tanh(mpmath.mpf(x - y) / k)) / 2
        assert core.b_kappa(x, y, k) == pytest.approx(float(ref), rel=1e-14, abs=1e-300)


def test_b_kappa_rejects_negative_kappa():
    with pytest.raises(ValueError):
        core.b_kappa(0, 0.5, -1.0)


def test_b_kappa_arrays():
    x = np.array([0.0, 1.0, 2.0])
    out = core.b_kappa(x, 0.5, 0.5)
    assert out.shape == (3,)
    assert out[0] == pytest.approx(math.tanh(1.0))
    assert np.array_equal(core.b_kappa(x, 0.5, 0.0), [1.0, 0.0, 0.0])


@given(finite, finite, st.one_of(st.just(0.0), pos_kappa, st.just(math.inf)))
def test_b_kappa_even_in_x_odd_in_y(x, y, k):
    assert core.b_kappa(-x, y, k) == core.b_kappa(x, y, k)
    assert core.b_kappa(x, -y, k) == -core.b_kappa(x, y, k)


@given(st.floats(-10, 10), st.floats(0.05, 10))
def test_b_kappa_small_kappa_limit(x, y):
    if abs(abs(x) - y) < 0.05:
        return
    assert abs(core.b_kappa(x, y, 1e-3) - core.b_function(x, y)) <= 1e-9


@given(st.floats(-10, 10), st.floats(0.01, 10))
def test_b_kappa_large_kappa_limit(x, y):
    k = 1e6
    assert abs(k * core.b_kappa(x, y, k) / y - 1) <= 1e-6


@pytest.mark.parametrize("j", range(6))
@pytest.mark.parametrize("kappa", [0.01, 0.1, 0.5, 1.0, 3.0, 10.0, 100.0])
def test_db_kappa_dkappa_finite_differences(j, kappa):
    h = 1e-6 * kappa
    fd = (core.b_kappa(j, 0.5, kappa + h) - core.b_kappa(j, 0.5, kappa - h)) / (2 * h)
    assert abs(core.db_kappa_dkappa(j, kappa) - fd) <= 1e-6


def test_db_kappa_dkappa_limits():
    assert core.db_kappa_dkappa(0, 0.0) == 0.0
    assert abs(core.db_kappa_dkappa(0, 1e-3)) < 1e-100
    assert core.db_kappa_dkappa(3, math.inf) == 0.0


def test_embedding_weight_limits():
    assert core.embedding_weight(0, 0.0) == 1.0
    assert core.embedding_weight(1, 0.0) == 0.0
    assert core.embedding_weight(0, math.inf) == 1.0
    assert core.embedding_weight(4, 1e9) == pytest.approx(1.0, abs=1e-8)
    assert core.embedding_weight_dkappa(0, 0.0) == 2.0
    assert core.embedding_weight_dkappa(1, 0.0) == 0.0


@given(st.integers(-4, 4), st.floats(0.01, 50))
def test_embedding_weight_derivative(j, kappa):
    h = 1e-6 * kappa
    fd = (core.embedding_weight(j, kappa + h) - core.embedding_weight(j, kappa - h)) / (2 * h)
    assert core.embedding_weight_dkappa(j, kappa) == pytest.approx(fd, abs=1e-6)


@pytest.mark.parametrize("p, k, x, d", [(10, 0, 347, 7), (10, 2, 347, 3), (10, -1, 0.25, 2), (10, 5, 347, 0),
                                        (3, 1, 5, 1), (2, -3, 0.125, 1)])
def test_digit_values(p, k, x, d):
    assert core.digit(p, k, x) == d


def test_digit_rejects_bad_input():
    with pytest.raises(ValueError):
        core.digit(10, 0, -1)
    with pytest.raises(ValueError):
        core.digit(1, 0, 3)


@given(st.integers(2, 16), st.data())
def test_digit_reconstruction(p, data):
    x = data.draw(st.integers(0, p**8 - 1))
    digits = [core.digit(p, k, x) for k in range(8)]
    assert all(0 <= d < p for d in digits)
    assert sum(p**k * d for k, d in enumerate(digits)) == x


@given(st.integers(2, 12), st.integers(-20, 20), st.floats(0, 1e6))
def test_digit_range_and_exactness(p, k, x):
    d = core.digit(p, k, x)
    v = Fraction(x)
    assert 0 <= d < p
    assert d == math.floor(v / Fraction(p) ** k) - p * math.floor(v / Fraction(p) ** (k + 1))


def test_complex_digit():
    assert core.complex_digit(10, 0, 3 - 4j) == 3 - 4j
    assert core.complex_digit(10, 0, 0) == 0
    assert core.complex_digit(3, 1, 5 + 7j) == 1 + 2j
    assert core.complex_digit(3, 1, -5 - 7j) == -1 - 2j


def test_disk():
    assert core.disk(0, 0, 1, 0) == 1.0
    assert core.disk(1, 0, 1, 0) == 0.5
    assert core.disk(2, 0, 1, 0) == 0.0
    k = 1e6
    assert core.disk(30, 40, 1.0, k) == pytest.approx(1.0 / k, rel=1e-6)
    with pytest.raises(ValueError):
        core.disk(0, 0, 0, 1)


def test_kappa_schedule():
    assert core.kappa_schedule(0) == 0.0
    assert core.kappa_schedule(math.log(2)) == pytest.approx(1.0)
    assert core.kappa_schedule(30) == pytest.approx(math.exp(30), rel=1e-12)
    ts = np.linspace(0, 5, 50)
    assert np.all(np.diff([core.kappa_schedule(t) for t in ts]) > 0)
