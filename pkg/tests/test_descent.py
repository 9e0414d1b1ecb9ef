import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradcert.descent import detect_descent_convergence, margin_ok, run, step_margins
from gradcert.exceptions import ArgumentError
from gradcert.objective import ConvexRegion, Problem, make_problem, quadratic
from gradcert.schedule import Schedule, gamma


def replay(problem, x0, schedule, n):
    x = np.asarray(x0, dtype=float)
    out = [x]
    for k in range(n):
        x = x - gamma(schedule, k) * problem.grad(x)
        out.append(x)
    return np.array(out)


def test_hand_iteration():
    log = run(quadratic(d=2), [1.0, 0.0], Schedule.constant(0.1), 3)
    # 0.9 * 0.81 is not 0.729 in binary; compare with decimal literals to the ulp
    np.testing.assert_array_max_ulp(log.iterates[:, 0], [1.0, 0.9, 0.81, 0.729], maxulp=1)
    assert np.all(log.iterates[:, 1] == 0.0)
    np.testing.assert_array_equal(log.iterates, replay(quadratic(d=2), [1.0, 0.0], Schedule.constant(0.1), 3))


def test_geometric_weighted_sum():
    log = run(quadratic(d=2), [1.0, 0.0], Schedule.constant(0.1), 200)
    assert log.total_weighted_sum == pytest.approx(0.1 / (1 - 0.81), abs=1e-9)
    assert np.all(np.diff(log.weighted_sum) >= 0)
    assert len(log.f_values) == len(log.iterates) == log.n_steps + 1


def test_stationary_start():
    log = run(make_problem("rosenbrock"), [1.0, 1.0], Schedule.constant(0.1), 10)
    assert log.stopped_reason == "stationary" and log.n_steps == 0
    assert log.total_weighted_sum == 0.0
    v = detect_descent_convergence(log, 50, 1e-12)
    assert v.f_cauchy and v.weighted_sum_plateau and v.min_grad_tail == 0.0


def test_divergence_is_recorded():
    log = run(quadratic(d=2), [1.0, 0.0], Schedule.constant(2.5), 5000)
    assert log.stopped_reason == "overflow"
    assert np.all(np.isfinite(log.iterates)) and np.all(np.isfinite(log.f_values))
    assert not detect_descent_convergence(log, 50, 1e-8).f_cauchy


def test_margin_examples():
    log = run(quadratic(d=2), [1.0, 0.0], Schedule.constant(0.1), 1)
    m = step_margins(log, 1.0, 1.0)[0]
    assert m.lhs == pytest.approx(-0.095, abs=1e-15)
    assert m.bound == pytest.approx(-0.095, abs=1e-15)
    assert abs(m.slack) <= 1e-15

    log = run(quadratic(diag=[1.0, 4.0]), [1.0, 1.0], Schedule.constant(0.1), 1)
    np.testing.assert_allclose(log.iterates[1], [0.9, 0.6])
    m = step_margins(log, 4.0, 1.0)[0]
    assert m.lhs == pytest.approx(-1.375)
    assert m.bound == pytest.approx(-1.36)
    assert m.slack == pytest.approx(0.015)


def test_region_bookkeeping():
    box = ConvexRegion.box([-2.0, -2.0], [2.0, 2.0])
    log = run(quadratic(diag=[1.0, 4.0]), [1.0, 1.0], Schedule.power_law(1.0, 1.0), 10, box)
    # x_1 = (0, -3) leaves the box
    assert list(log.in_region[:3]) == [True, False, False]
    margins = step_margins(log, 4.0, 1.0)
    assert [m.inside for m in margins[:2]] == [False, False]
    with pytest.raises(ArgumentError):
        run(quadratic(d=2), [3.0, 0.0], Schedule.constant(0.1), 5, box)


def test_window_rules():
    log = run(quadratic(diag=[1.0, 2.0]), [1.0, 1.0], Schedule.constant(0.1), 50)
    with pytest.raises(ArgumentError):
        detect_descent_convergence(log, 51, 1e-8)
    v = detect_descent_convergence(log, 10, 1e-8)
    assert v.min_grad_tail == log.grad_norms[-11:].min()
    assert v.inf_f_observed == log.f_values.min()


def test_long_run_tail():
    log = run(quadratic(d=2), [1.0, 0.0], Schedule.constant(0.1), 500)
    v = detect_descent_convergence(log, 50, 1e-8)
    assert v.f_cauchy and v.min_grad_tail < 1e-10


def test_divergent_harmonic_steps_drive_gradient_down():
    # gamma_0 = 0.5 keeps the run away from the exact one-step landing at 0
    # on a diagonal quadratic each coordinate is multiplied by (1 - gamma_k lambda)
    s = Schedule.power_law(0.5, 0.6)
    log = run(quadratic(diag=[1.0, 0.01]), [1.0, 1.0], s, 20_000)
    assert log.stopped_reason in ("horizon", "stationary")
    steps = np.array([gamma(s, k) for k in range(log.n_steps)])
    assert log.iterates[-1, 1] == pytest.approx(np.prod(1 - 0.01 * steps), rel=1e-9)
    assert log.iterates[-1, 1] < np.exp(-0.01 * steps.sum()) + 1e-12


def test_csv_layout():
    log = run(quadratic(d=2), [1.0, 0.0], Schedule.constant(0.1), 2, ConvexRegion.box([-1, -1], [1, 1]))
    buf = io.StringIO()
    log.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "n,x_0,x_1,F,grad_norm,gamma,weighted_sum,in_region"
    assert lines[1] == "0,1,0,0.5,1,0.10000000000000001,0.10000000000000001,1"
    assert lines[-1].endswith(",,,1")


def test_custom_python_objective():
    p = Problem("abs4", 1, lambda x: float(x[0] ** 4), lambda x: 4 * x ** 3)
    log = run(p, [1.0], Schedule.constant(0.01), 100)
    assert log.f_values[-1] < log.f_values[0]


@given(st.integers(0, 10_000), st.floats(0.2, 8.0), st.floats(0.2, 8.0),
       st.floats(0.01, 1.0), st.floats(0.0, 1.5))
def test_descent_inequality_on_quadratics(seed, l1, l2, a, beta):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    A = q @ np.diag([l1, l2]) @ q.T
    A = 0.5 * (A + A.T)
    box = ConvexRegion.box([-5.0, -5.0], [5.0, 5.0])
    log = run(quadratic(A=A), rng.uniform(-2, 2, 2), Schedule.power_law(a, beta), 200, box)
    c = np.linalg.eigvalsh(A)[-1]
    assert all(margin_ok(m) for m in step_margins(log, c, 1.0) if m.inside)


@given(st.integers(0, 10_000), st.floats(0.05, 0.45))
def test_sufficient_decrease(seed, gamma_c):
    # gamma < 2 / c with c = 4
    rng = np.random.default_rng(seed)
    p = quadratic(diag=[1.0, 4.0])
    log = run(p, rng.uniform(-3, 3, 2), Schedule.constant(gamma_c), 300)
    assert np.all(np.diff(log.f_values) <= 1e-12)


@given(st.integers(0, 10_000), st.sampled_from(["rosenbrock", "himmelblau", "ann_softplus"]))
def test_replay_is_bitwise(seed, name):
    p = make_problem(name)
    x0 = p.start + np.random.default_rng(seed).uniform(-0.1, 0.1, p.dim)
    s = Schedule.power_law(1e-3, 0.5)
    log = run(p, x0, s, 50)
    np.testing.assert_array_equal(log.iterates, replay(p, x0, s, log.n_steps))
    np.testing.assert_array_equal(log.iterates, run(p, x0, s, 50).iterates)
