import itertools
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from shell_lab.stochastic import PSDError, StateSample, covariance_matrix, sample_gaussian_cloud
from shell_lab.wasserstein import (ProductCost, SampleCloud, bures_squared, cost_matrix, empirical_wp,
                                   gaussian_w2, mean_gap_lower_bound, optimal_assignment, pairing_cost,
                                   shift_linearity_defect)

points = arrays(float, (6, 3), elements=st.floats(-10, 10))
shifts = arrays(float, 3, elements=st.floats(-10, 10))


def bures_oracle(S1, S2):
    r = scipy.linalg.sqrtm(S1)
    cross = scipy.linalg.sqrtm(r @ S2 @ r)
    return float(np.real(np.trace(S1) + np.trace(S2) - 2 * np.trace(cross)))


def brute_force_wp(A, B, p, ou=False):
    best = math.inf
    for perm in itertools.permutations(range(A.size)):
        best = min(best, pairing_cost(A, B, perm, p, ProductCost.EXTENDED if ou else ProductCost.SHELL_ONLY))
    return best


# --- Gaussian closed form --------------------------------------------------------

def test_gaussian_examples():
    S = covariance_matrix(4, 1.0, 1.0, 1.0)
    m1, m2 = np.array([1.0, 2, 3, 4]), np.array([0.0, 2, 1, 4])
    assert gaussian_w2(m1, S, m1, S) == pytest.approx(0.0, abs=1e-7)
    assert gaussian_w2(m1, S, m2, S) == pytest.approx(math.sqrt(5), rel=1e-7)
    a, b = np.array([1.0, 4.0, 0.25]), np.array([2.0, 1.0, 0.0])
    assert gaussian_w2(np.zeros(3), np.diag(a), np.zeros(3), np.diag(b)) == pytest.approx(
        math.sqrt(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2)), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_bures_vs_scipy_sqrtm(seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.standard_normal((5, 5)), rng.standard_normal((5, 5))
    S1, S2 = X @ X.T + 0.1 * np.eye(5), Y @ Y.T + 0.1 * np.eye(5)
    assert bures_squared(S1, S2) == pytest.approx(bures_oracle(S1, S2), rel=1e-9, abs=1e-11)


def test_bures_accepts_covariance_objects():
    S1 = covariance_matrix(6, 1.0, 1.0, 1.0)
    S2 = covariance_matrix(6, math.inf, 1.0, 1.0)
    assert bures_squared(S1, S2) == pytest.approx(bures_squared(S1.entries, S2.entries))
    assert bures_squared(S1, S2) == pytest.approx(bures_oracle(S1.entries, S2.entries), abs=1e-10)


@given(arrays(float, (3, 3), elements=st.floats(-3, 3)), arrays(float, (3, 3), elements=st.floats(-3, 3)),
       arrays(float, (3, 3), elements=st.floats(-3, 3)))
def test_bures_is_a_metric(a, b, c):
    S = [m @ m.T for m in (a, b, c)]
    d = lambda x, y: math.sqrt(bures_squared(x, y))
    assert d(S[0], S[0]) <= 1e-6 * (1 + math.sqrt(np.trace(S[0])))
    assert d(S[0], S[1]) == pytest.approx(d(S[1], S[0]), abs=1e-6)
    assert d(S[0], S[2]) <= d(S[0], S[1]) + d(S[1], S[2]) + 1e-6


def test_gaussian_matches_empirical_at_moderate_size():
    rng = np.random.default_rng(3)
    S1 = covariance_matrix(8, 0.5, 1.0, 1.0)
    S2 = covariance_matrix(8, math.inf, 1.0, 1.0)
    m1 = np.linspace(0.5, -0.2, 8)
    exact = gaussian_w2(m1, S1, np.zeros(8), S2)
    A = SampleCloud(sample_gaussian_cloud(m1, S1, 512, rng))
    B = SampleCloud(sample_gaussian_cloud(np.zeros(8), S2, 512, rng))
    assert empirical_wp(A, B, 2) == pytest.approx(exact, rel=0.10)


def test_gaussian_validation():
    with pytest.raises(ValueError):
        gaussian_w2(np.zeros(2), np.eye(3), np.zeros(2), np.eye(3))
    with pytest.raises(PSDError):
        bures_squared(np.diag([1.0, -1.0]), np.eye(2))


# --- empirical assignment -----------------------------------------------------------

def test_empirical_examples():
    rng = np.random.default_rng(0)
    A = SampleCloud(rng.standard_normal((30, 4)))
    u = np.array([1.0, -2.0, 0.5, 3.0])
    assert empirical_wp(A, A, 1) == 0.0
    assert empirical_wp(A.shifted(u), A, 2) == pytest.approx(np.linalg.norm(u), rel=1e-12)
    assert shift_linearity_defect(np.zeros(4), A) == 0.0


@given(points, points, st.sampled_from([1, 2]))
def test_assignment_matches_brute_force(a, b, p):
    A, B = SampleCloud(a), SampleCloud(b)
    got = optimal_assignment(A, B, p)
    assert got.value == pytest.approx(brute_force_wp(A, B, p), rel=1e-9, abs=1e-12)
    assert pairing_cost(A, B, got.permutation, p) == pytest.approx(got.value, rel=1e-12, abs=1e-12)


@given(arrays(float, 5, elements=st.floats(-5, 5)), arrays(float, 5, elements=st.floats(-5, 5)),
       arrays(float, 5, elements=st.floats(-5, 5)), arrays(float, 5, elements=st.floats(-5, 5)))
def test_extended_cost_matches_brute_force(a, b, oa, ob):
    A, B = SampleCloud(a, oa), SampleCloud(b, ob)
    assert empirical_wp(A, B, 1, ProductCost.EXTENDED) == pytest.approx(brute_force_wp(A, B, 1, ou=True),
                                                                        rel=1e-9, abs=1e-12)


@given(arrays(float, 40, elements=st.floats(-50, 50)), arrays(float, 40, elements=st.floats(-50, 50)),
       st.sampled_from([1, 2]))
def test_one_dimensional_sorted_coupling(a, b, p):
    expect = np.mean(np.abs(np.sort(a) - np.sort(b)) ** p) ** (1 / p)
    assert empirical_wp(SampleCloud(a), SampleCloud(b), p) == pytest.approx(expect, rel=1e-9, abs=1e-9)


@given(points, points, points)
def test_empirical_metric_axioms(a, b, c):
    A, B, C = (SampleCloud(x) for x in (a, b, c))
    for p in (1, 2):
        assert empirical_wp(A, B, p) == pytest.approx(empirical_wp(B, A, p), rel=1e-12, abs=1e-12)
        assert empirical_wp(A, C, p) <= empirical_wp(A, B, p) + empirical_wp(B, C, p) + 1e-9
    assert empirical_wp(A, B, 1) <= empirical_wp(A, B, 2) + 1e-9


@given(points, points, shifts, shifts)
def test_translation_invariance(a, b, u, v):
    A, B = SampleCloud(a), SampleCloud(b)
    lhs = empirical_wp(A.shifted(u), B.shifted(v), 1)
    assert lhs == pytest.approx(empirical_wp(A.shifted(u - v), B, 1), rel=1e-9, abs=1e-9)


@given(points, points)
def test_mean_gap_is_lower_bound(a, b):
    A, B = SampleCloud(a), SampleCloud(b)
    assert mean_gap_lower_bound(A, B) <= empirical_wp(A, B, 1) + 1e-9


@given(points, shifts, st.sampled_from([1, 2]))
def test_shift_linearity(a, u, p):
    assert shift_linearity_defect(u, SampleCloud(a), p) <= 1e-9 * (1 + np.linalg.norm(u) + np.abs(a).max())


def test_shift_against_independent_cloud():
    rng = np.random.default_rng(8)
    A, A2 = SampleCloud(rng.standard_normal((400, 3))), SampleCloud(rng.standard_normal((400, 3)))
    u = np.array([2.0, 0.0, -1.0])
    mean_err = np.linalg.norm(A.mean() - A2.mean())
    assert empirical_wp(A.shifted(u), A2, 1) >= np.linalg.norm(u) - mean_err - 1e-12


def test_cloud_construction():
    samples = [StateSample(np.array([1.0, 2.0]), 0.5), StateSample(np.array([0.0, 1.0]), -0.5)]
    cloud = SampleCloud.from_samples(samples)
    assert cloud.size == 2 and cloud.dim == 2 and cloud.with_ou_coordinate
    assert cloud.leading(1).dim == 1
    np.testing.assert_array_equal(cloud.shifted([1.0, 1.0], 2.0).ou, [2.5, 1.5])
    c = cost_matrix(cloud, cloud, ProductCost.EXTENDED)
    assert c[0, 1] == pytest.approx(math.sqrt(2) + 1.0)
    with pytest.raises(ValueError):
        SampleCloud.from_samples([samples[0], StateSample(np.zeros(2))])
    with pytest.raises(ValueError):
        SampleCloud(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        SampleCloud([[np.nan]])
    with pytest.raises(ValueError):
        cost_matrix(SampleCloud(np.zeros((2, 2))), SampleCloud(np.zeros((2, 2))), ProductCost.EXTENDED)
    with pytest.raises(ValueError):
        empirical_wp(SampleCloud(np.zeros((2, 2))), SampleCloud(np.zeros((3, 2))))
    with pytest.raises(ValueError):
        empirical_wp(SampleCloud(np.zeros((2, 2))), SampleCloud(np.zeros((2, 2))), p=3)
