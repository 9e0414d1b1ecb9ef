import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradcert.exceptions import ArgumentError, InsufficientDataError
from gradcert.holder import estimate_alpha, estimate_c, estimate_c_from_pairs, sample_pairs
from gradcert.objective import ConvexRegion, make_problem, quadratic

SQUARE = ConvexRegion.box([-1.0, -1.0], [1.0, 1.0])


def _ratios(problem, X, Y, alpha):
    num = np.einsum("ij,ij->i", np.array([problem.grad(x) - problem.grad(y) for x, y in zip(X, Y)]), X - Y)
    return num / np.linalg.norm(X - Y, axis=1) ** (1 + alpha)


def test_brute_force_oracle_matches():
    p = quadratic(diag=[1.0, 4.0])
    est = estimate_c(p, SQUARE, 1.0, 2000, seed=3)
    X, Y = sample_pairs(SQUARE, 2000, 3)
    assert est.c_hat == max(0.0, _ratios(p, X, Y, 1.0).max())
    x, y = est.max_ratio_pair
    assert _ratios(p, x[None], y[None], 1.0)[0] == est.c_hat


def test_diag_quadratic_approaches_largest_eigenvalue():
    est = estimate_c(quadratic(diag=[1.0, 4.0]), SQUARE, 1.0, 10_000, seed=0)
    assert 3.5 <= est.c_hat <= 4.0 + 1e-9


def test_identity_ratio_is_one():
    est = estimate_c(quadratic(d=2), ConvexRegion.ball([0.0, 0.0], 1.0), 1.0, 500, seed=1)
    assert est.c_hat == pytest.approx(1.0, abs=1e-9)


def test_concave_gives_zero_and_no_exponent():
    p = quadratic(diag=[-1.0, -1.0])
    assert estimate_c(p, SQUARE, 1.0, 500).c_hat == 0.0
    with pytest.raises(InsufficientDataError):
        estimate_alpha(p, SQUARE, 1000, 10)


def test_exponent_of_quadratics():
    est = estimate_alpha(quadratic(d=2), SQUARE, 100_000, 10, seed=0)
    assert 0.95 <= est.alpha <= 1.0
    est = estimate_alpha(quadratic(diag=[1.0, 4.0]), SQUARE, 100_000, 10, seed=0)
    assert 0.9 <= est.alpha <= 1.0
    assert est.c_hat <= 4.2
    assert est.raw_slope == pytest.approx(est.alpha + 1)


def test_flat_region_rejected():
    with pytest.raises(ArgumentError):
        estimate_c(quadratic(d=2), ConvexRegion.box([0.0, 0.0], [1.0, 0.0]), 1.0, 10)


def test_norm_choice_changes_denominator():
    p = quadratic(d=2)
    c1 = estimate_c(p, SQUARE, 1.0, 1000, norm="l1").c_hat
    cinf = estimate_c(p, SQUARE, 1.0, 1000, norm="linf").c_hat
    # |v|_2^2 / |v|_1^2 <= 1 <= |v|_2^2 / |v|_inf^2 <= 2
    assert c1 <= 1.0 + 1e-12 and 1.0 <= cinf <= 2.0 + 1e-12
    with pytest.raises(ArgumentError):
        estimate_c(p, SQUARE, 1.0, 10, norm="l3")


def test_coincident_pairs_skipped():
    p = quadratic(d=2)
    X = np.array([[0.1, 0.2], [0.0, 0.0]])
    est = estimate_c_from_pairs(p, X, X.copy(), 1.0)
    assert est.n_pairs == 0 and est.n_skipped == 2 and est.c_hat == 0.0


@given(st.integers(0, 10_000), st.sampled_from([0.3, 0.7, 1.0]))
def test_estimate_certifies_its_own_sample(seed, alpha):
    p = make_problem("himmelblau")
    region = ConvexRegion.box([-2.0, -2.0], [2.0, 2.0])
    est = estimate_c(p, region, alpha, 300, seed=seed)
    X, Y = sample_pairs(region, 300, seed)
    num = _ratios(p, X, Y, alpha) * np.linalg.norm(X - Y, axis=1) ** (1 + alpha)
    assert np.all(num <= est.c_hat * np.linalg.norm(X - Y, axis=1) ** (1 + alpha) + 1e-12)


@given(st.integers(0, 10_000))
def test_swap_symmetry(seed):
    p = make_problem("rosenbrock")
    X, Y = sample_pairs(SQUARE, 200, seed)
    assert estimate_c_from_pairs(p, X, Y, 0.5).c_hat == estimate_c_from_pairs(p, Y, X, 0.5).c_hat


@given(st.integers(0, 10_000), st.integers(1, 5000), st.integers(1, 5000))
def test_more_pairs_never_lowers_c_hat(seed, n, extra):
    p = make_problem("rosenbrock")
    small = estimate_c(p, SQUARE, 1.0, n, seed=seed)
    large = estimate_c(p, SQUARE, 1.0, n + extra, seed=seed)
    assert large.c_hat >= small.c_hat


@given(st.integers(0, 10_000), st.floats(0.1, 10.0), st.floats(0.1, 10.0), st.floats(-3.0, 3.0))
def test_spd_quadratic_never_exceeds_largest_eigenvalue(seed, l1, l2, angle):
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    A = rot @ np.diag([l1, l2]) @ rot.T
    A = 0.5 * (A + A.T)
    est = estimate_c(quadratic(A=A), SQUARE, 1.0, 300, seed=seed)
    assert est.c_hat <= np.linalg.eigvalsh(A)[-1] + 1e-9
