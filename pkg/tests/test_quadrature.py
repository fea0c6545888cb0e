import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import jv

from shell_lab.quadrature import GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES, QuadratureError, integrate


def test_rule_tables():
    assert NODES.size == 15
    np.testing.assert_allclose(NODES, -NODES[::-1], atol=1e-16)
    assert math.fsum(KRONROD_WEIGHTS) == pytest.approx(2.0, abs=1e-15)
    assert math.fsum(GAUSS_WEIGHTS) == pytest.approx(2.0, abs=1e-15)
    # 15-point Kronrod integrates x^22 exactly, the embedded 7-point Gauss x^12
    assert np.dot(KRONROD_WEIGHTS, NODES ** 22) == pytest.approx(2 / 23, rel=1e-13)
    assert np.dot(GAUSS_WEIGHTS, NODES ** 12) == pytest.approx(2 / 13, rel=1e-13)


@given(st.integers(0, 20), st.floats(-3, 3), st.floats(0.1, 4))
def test_polynomials_exact(k, a, width):
    b = a + width
    res = integrate(lambda x: x ** k, a, b)
    exact = (b ** (k + 1) - a ** (k + 1)) / (k + 1)
    assert res.value == pytest.approx(exact, rel=1e-11, abs=1e-12)


def test_oscillatory_bessel_product():
    # int_0^inf J_1(x)^2 / x dx = 1/2
    res = integrate(lambda x: np.where(x > 0, jv(1, x) ** 2 / np.maximum(x, 1e-300), 0.0), 0.0, 4000.0,
                    panels=800, epsabs=1e-12)
    assert res.value == pytest.approx(0.5 - 1 / (math.pi * 4000), abs=2e-4)


def test_vector_integrand():
    res = integrate(lambda x: np.stack([np.sin(x), np.cos(x), x], axis=1), 0.0, math.pi)
    np.testing.assert_allclose(res.value, [2.0, 0.0, math.pi ** 2 / 2], atol=1e-12)


def test_breakpoints_for_kinks():
    res = integrate(lambda x: np.abs(x - 0.3), 0.0, 1.0, breakpoints=[0.3])
    assert res.value == pytest.approx(0.045 + 0.245, abs=1e-14)


def test_degenerate_and_invalid_limits():
    assert integrate(np.sin, 1.0, 1.0).value == 0.0
    with pytest.raises(ValueError):
        integrate(np.sin, 0.0, math.inf)


def test_budget_exhaustion():
    with pytest.raises(QuadratureError):
        integrate(lambda x: np.sin(1 / np.maximum(x, 1e-12)), 0.0, 1.0, max_intervals=20, epsabs=1e-14)
    res = integrate(lambda x: np.sin(1 / np.maximum(x, 1e-12)), 0.0, 1.0, max_intervals=20, strict=False)
    assert np.isfinite(res.value)
