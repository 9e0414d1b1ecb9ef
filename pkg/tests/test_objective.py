import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradcert.exceptions import ArgumentError, NumericOverflowError
from gradcert.objective import (PROBLEM_NAMES, ConvexRegion, Problem, check_gradient, contains,
                                make_problem, mexican_hat, parse_problem_spec, parse_region_spec,
                                quadratic)


def test_quadratic_value_and_gradient_by_hand():
    p = quadratic(A=[[2.0, 1.0], [1.0, 3.0]], b=[1.0, -1.0])
    x = np.array([1.0, 2.0])
    # 0.5 * (2 + 4 + 12) + (1 - 2)
    assert p.eval(x) == 8.0
    np.testing.assert_array_equal(p.grad(x), [5.0, 6.0])
    np.testing.assert_allclose(p.minimizer, np.linalg.solve([[2, 1], [1, 3]], [-1, 1]))


def test_rosenbrock_known_points():
    p = make_problem("rosenbrock")
    assert p.eval([1.0, 1.0]) == 0.0
    np.testing.assert_array_equal(p.grad([1.0, 1.0]), [0.0, 0.0])
    assert p.eval([-1.2, 1.0]) == pytest.approx(24.2)


def test_himmelblau_minima():
    p = make_problem("himmelblau")
    for m in ([3.0, 2.0], [-2.805118, 3.131312], [-3.779310, -3.283186], [3.584428, -1.848126]):
        assert p.eval(m) < 1e-10


def test_ann_loss_at_zero_parameters():
    p = make_problem("ann_softplus")
    # network output is identically 0, loss is mean of |u|^2
    u = -1 + 2 * np.arange(10) / 9
    assert p.eval(np.zeros(10)) == pytest.approx(np.mean(u ** 2), rel=1e-15)


def test_mexican_hat_vanishes_outside_disc():
    p = mexican_hat()
    assert p.eval([1.0, 0.0]) == 0.0
    assert p.eval([0.8, 0.9]) == 0.0
    np.testing.assert_array_equal(p.grad([1.5, -2.0]), [0.0, 0.0])


@pytest.mark.parametrize("name", PROBLEM_NAMES)
def test_gradient_matches_central_differences(name):
    p = make_problem(name)
    rng = np.random.default_rng(7)
    for _ in range(25):
        x = p.start + 0.3 * rng.standard_normal(p.dim)
        assert check_gradient(p, x) <= 1e-5


def test_mexican_hat_gluing_circle():
    p = mexican_hat()
    for r in (1 - 1e-4, 1 + 1e-4):
        for theta in np.linspace(0, 2 * np.pi, 7):
            x = r * np.array([np.cos(theta), np.sin(theta)])
            assert check_gradient(p, x, h=1e-6) <= 1e-4


def test_check_gradient_catches_wrong_gradient():
    p = Problem("bad", 2, lambda x: float(x @ x), lambda x: x)
    assert check_gradient(p, [1.0, 1.0]) > 0.4


def test_custom_problem_is_not_compiled():
    p = Problem("sq", 1, lambda x: float(x[0] ** 2), lambda x: 2 * x)
    assert not p.compiled
    assert make_problem("rosenbrock").compiled


def test_non_finite_values_raise():
    p = Problem("blowup", 1, lambda x: float("inf"), lambda x: x)
    with pytest.raises(NumericOverflowError):
        p.eval([0.0])


def test_dimension_mismatch():
    with pytest.raises(ArgumentError):
        make_problem("rosenbrock").eval([1.0, 2.0, 3.0])


@pytest.mark.parametrize("spec", ["quadratic:A=1,0;0,4", "quadratic:A=2,1;1,2,b=1,-1",
                                  "rosenbrock:d=4", "ann_softplus:seed=3", "mexican_hat:scale=2.0",
                                  "himmelblau", "quadratic:diag=1,2,3"])
def test_spec_round_trip(spec):
    p = parse_problem_spec(spec)
    q = parse_problem_spec(p.spec())
    x = np.linspace(-0.5, 0.5, p.dim)
    assert p.eval(x) == q.eval(x)
    np.testing.assert_array_equal(p.grad(x), q.grad(x))


def test_malformed_numbers_report_position():
    with pytest.raises(ArgumentError, match="position 3"):
        parse_problem_spec("quadratic:diag=1,2,x")
    with pytest.raises(ArgumentError, match="unknown parameter"):
        parse_problem_spec("rosenbrock:q=1")
    with pytest.raises(ArgumentError, match="unknown problem"):
        parse_problem_spec("nope")
    with pytest.raises(ArgumentError, match="symmetric"):
        quadratic(A=[[1.0, 2.0], [0.0, 1.0]])


def test_regions():
    box = parse_region_spec("box:-1,1", 2)
    assert contains(box, [1.0, -1.0]) and not contains(box, [1.0001, 0.0])
    ball = parse_region_spec("ball:center=1,1,radius=0.5", 2)
    assert contains(ball, [1.3, 1.3]) and not contains(ball, [1.4, 1.4])
    assert parse_region_spec(ball.spec(), 2).radius == 0.5
    assert parse_region_spec("box:lo=0,1,hi=2,3", 2).diameter == pytest.approx(np.sqrt(8))
    assert not ConvexRegion.box([0.0, 0.0], [0.0, 1.0]).has_volume


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["box", "ball"]))
def test_region_samples_are_inside(seed, kind):
    region = ConvexRegion.box([-1.0, 0.0, 2.0], [1.0, 0.5, 3.0]) if kind == "box" \
        else ConvexRegion.ball([0.0, 1.0, -1.0], 0.7)
    pts = region.sample(np.random.default_rng(seed), 50)
    assert all(region.contains(p) for p in pts)
