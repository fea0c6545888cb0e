import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from shell_lab.bessel import kernel_h
from shell_lab.lattice import (LatticeParams, apply_generator, deterministic_solution, deterministic_solution_expm,
                               flow_matrix, generator_matrix, lyapunov_defect, shell_vector, unit_vector)


def test_generator_examples():
    p = LatticeParams(0.7, 6)
    e1, e2, e3 = (unit_vector(k, 6) for k in (1, 2, 3))
    np.testing.assert_array_equal(apply_generator(e1, p), -0.7 * e1 + e2)
    np.testing.assert_array_equal(apply_generator(e2, p), -e1 - 0.7 * e2 + e3)
    np.testing.assert_array_equal(apply_generator(np.zeros(6), p), np.zeros(6))


@given(arrays(float, 12, elements=st.floats(-5, 5)))
def test_generator_matrix_matches_action(x):
    p = LatticeParams(1.3, 12)
    np.testing.assert_allclose(generator_matrix(p) @ x, apply_generator(x, p), atol=1e-14)


@given(arrays(float, 12, elements=st.floats(-5, 5)))
def test_coupling_is_skew(x):
    # <x, R x> = 0: the nonviscous part conserves energy
    p = LatticeParams(1.0, 12)
    skew = generator_matrix(p) + np.eye(12)
    assert abs(x @ skew @ x) <= 1e-12 * max(1.0, x @ x)


def test_flow_trivial_cases():
    p = LatticeParams(0.5, 40)
    x = np.arange(40.0)
    np.testing.assert_array_equal(deterministic_solution(x, 0.0, p), x)
    np.testing.assert_array_equal(deterministic_solution(np.zeros(40), 2.0, p), np.zeros(40))
    np.testing.assert_array_equal(deterministic_solution_expm(x, 0.0, p), x)


@pytest.mark.parametrize("t", [0.3, 1.0, 4.0])
def test_unit_impulse_gives_kernel(t):
    p = LatticeParams(0.8, 120)
    d = deterministic_solution(unit_vector(1, 120), t, p)
    ref = np.array([kernel_h(n, t, 0.8) for n in range(1, 121)])
    np.testing.assert_allclose(d, ref, atol=1e-14)


def test_expm_oracle_example():
    p = LatticeParams(0.5, 200)
    e1 = unit_vector(1, 200)
    gap = np.linalg.norm(deterministic_solution_expm(e1, 1.0, p) - deterministic_solution(e1, 1.0, p))
    assert gap <= 1e-8


def test_lyapunov_examples():
    p = LatticeParams(0.5, 400)
    e1, e3 = unit_vector(1, 400), unit_vector(3, 400)
    assert lyapunov_defect(e1, 0.0, p) == 0.0
    assert lyapunov_defect(e1, 2.0, p) <= 1e-8
    assert lyapunov_defect(e1 + e3, 5.0, p) <= 1e-8
    assert np.linalg.norm(deterministic_solution(e1, 3.0, p)) == pytest.approx(np.exp(-1.5), rel=1e-12)


@pytest.mark.parametrize("m", [2, 3, 4, 7])
def test_off_diagonal_columns_match_expm(m):
    # columns with m > n and odd m - n carry the signed Bessel order
    p = LatticeParams(1.0, 80)
    x = unit_vector(m, 80)
    for t in (0.5, 2.0, 6.0):
        np.testing.assert_allclose(deterministic_solution(x, t, p), deterministic_solution_expm(x, t, p),
                                   atol=1e-12)


@given(st.floats(0.0, 8.0), st.floats(0.1, 3.0))
def test_rescaled_flow_is_orthogonal(t, nu):
    # exp(nu t) T is orthogonal up to truncation; check the leading block
    p = LatticeParams(nu, 160)
    T = flow_matrix(t, p) * np.exp(nu * t)
    block = T[:, :40]
    np.testing.assert_allclose(block.T @ block, np.eye(40), atol=1e-10)


@given(st.floats(0.0, 4.0), st.floats(0.0, 4.0))
def test_semigroup(s, t):
    p = LatticeParams(0.6, 150)
    x = np.zeros(150)
    x[:5] = [1.0, -0.5, 0.25, 2.0, -1.0]
    two_step = deterministic_solution(deterministic_solution(x, s, p), t, p)
    np.testing.assert_allclose(two_step[:40], deterministic_solution(x, s + t, p)[:40], atol=1e-11)


def test_time_derivative_matches_generator():
    p = LatticeParams(0.9, 100)
    x = np.zeros(100)
    x[[0, 3, 6]] = [1.0, 2.0, -1.0]
    t, h = 1.5, 1e-5
    deriv = (deterministic_solution(x, t + h, p) - deterministic_solution(x, t - h, p)) / (2 * h)
    np.testing.assert_allclose(deriv[:50], apply_generator(deterministic_solution(x, t, p), p)[:50], atol=1e-8)


def test_stacked_states():
    p = LatticeParams(1.0, 60)
    X = np.zeros((4, 60))
    X[:, :6] = np.random.default_rng(1).standard_normal((4, 6))
    out = deterministic_solution(X, 1.0, p)
    for k in range(4):
        np.testing.assert_allclose(out[k], deterministic_solution(X[k], 1.0, p), atol=1e-15)
    np.testing.assert_allclose(out, X @ scipy.linalg.expm(generator_matrix(p)).T, atol=1e-12)


def test_validation():
    with pytest.raises(ValueError):
        LatticeParams(0.0)
    with pytest.raises(ValueError):
        LatticeParams(1.0, 1)
    with pytest.raises(ValueError):
        LatticeParams(1.0, 10, series_order_cap=5)
    with pytest.raises(ValueError):
        shell_vector([1.0, np.inf])
    with pytest.raises(ValueError):
        shell_vector([1.0, 2.0], dim=3)
    with pytest.raises(ValueError):
        unit_vector(0, 4)
    with pytest.raises(ValueError):
        deterministic_solution(np.ones(4), -1.0, LatticeParams(1.0, 4))
    with pytest.raises(ValueError):
        lyapunov_defect(np.zeros(4), 1.0, LatticeParams(1.0, 4))
