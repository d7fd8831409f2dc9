"""Truncated power series checked against sympy expansions."""

from functools import lru_cache

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from holowave.series import PowerSeries

ORDER = 6
X = sp.Symbol("x")
coeff = st.floats(-3.0, 3.0, allow_nan=False)
coeffs = st.lists(coeff, min_size=ORDER + 1, max_size=ORDER + 1)


def sympy_coeffs(expr, order=ORDER):
    poly = sp.series(expr, X, 0, order + 1).removeO()
    return np.array([float(poly.coeff(X, k)) for k in range(order + 1)])


A = sp.symbols(f"a0:{ORDER + 1}")


@lru_cache(maxsize=None)
def symbolic_power(e):
    # expansion with symbolic coefficients, built once; sympy.series on numeric
    # coefficients breaks down for subnormal inputs
    poly = sp.series(sum(A[k] * X ** k for k in range(ORDER + 1)) ** e, X, 0, ORDER + 1).removeO()
    return sp.lambdify(A, [sp.expand(poly).coeff(X, k) for k in range(ORDER + 1)])


def as_sympy(c):
    # exact rationals keep sympy stable on subnormal coefficients
    return sum(sp.Rational(v) * X ** k for k, v in enumerate(c))


@settings(max_examples=40, deadline=None)
@given(coeffs, coeffs)
def test_product_matches_sympy(a, b):
    got = (PowerSeries(a) * PowerSeries(b)).coeffs
    want = sympy_coeffs(sp.expand(as_sympy(a) * as_sympy(b)))
    np.testing.assert_allclose(got, want, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(coeffs, st.floats(0.5, 3.0))
def test_reciprocal_matches_sympy(a, c0):
    a = [c0] + a[1:]
    got = PowerSeries(a).reciprocal().coeffs
    want = np.array(symbolic_power(-1)(*a))
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(coeffs, st.floats(0.5, 3.0), st.sampled_from([0.5, -0.5, 1.5, 3.0, -2.0]))
def test_real_power_matches_sympy(a, c0, e):
    a = [c0] + a[1:]
    got = PowerSeries(a).power(e).coeffs
    want = np.array(symbolic_power(sp.Rational(str(e)))(*a))
    np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-8)


@given(coeffs)
def test_derivative_and_shift(a):
    s = PowerSeries(a)
    np.testing.assert_allclose(s.derivative().coeffs[:-1], np.arange(1, ORDER + 1) * a[1:])
    assert s.derivative().coeffs[-1] == 0.0
    up = s.x_times(2)
    np.testing.assert_array_equal(up.coeffs[2:], np.array(a[:-2]))
    np.testing.assert_array_equal(up.x_times(-2).coeffs[:-2], np.array(a[:-2]))


@given(coeffs, st.floats(-1.0, 1.0))
def test_horner_evaluation(a, x):
    want = sum(c * x ** k for k, c in enumerate(a))
    assert PowerSeries(a)(x) == pytest.approx(want, abs=1e-10)


def test_reciprocal_needs_constant_term():
    with pytest.raises(ZeroDivisionError):
        PowerSeries([0.0, 1.0]).reciprocal()
    with pytest.raises(ValueError):
        PowerSeries([-1.0, 1.0]).power(0.5)
    with pytest.raises(ValueError):
        PowerSeries([1.0, 1.0, 0.0]).x_times(-1)


def test_leading_power():
    assert PowerSeries([0.0, 0.0, 2.0, 1.0]).leading_power() == 2
    assert PowerSeries([0.0, 0.0]).leading_power() is None
