"""Gradient-flow integration with an exact-accuracy energy ledger.

The flow ``x'(t) = -grad F(x(t))`` is integrated by the Dormand-Prince 5(4)
pair together with one extra coordinate ``E'(t) = |grad F(x(t))|^2``, so the
dissipated energy ``E(t)`` carries the same local accuracy as the state.
Along an exact trajectory ``E(t) = F(x(0)) - F(x(t))``; the gap between the
two sides is reported by :func:`energy_residual`.
"""

from __future__ import annotations

import types
from dataclasses import dataclass

import numba
import numpy as np

from . import _csv
from ._validation import check_positive, check_vector
from .exceptions import ArgumentError, NumericOverflowError, StiffnessError
from .objective import Problem, _eval_kernel, _grad_kernel

__all__ = [
    "FlowTrajectory",
    "FlowVerdict",
    "integrate",
    "energy_residual",
    "detect_flow_convergence",
]

# Dormand-Prince 5(4) tableau; the 7th stage is the FSAL evaluation at the new point.
_A = np.array([
    [1 / 5, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Fourth-order continuous extension (Hairer, Norsett & Wanner).
_D = np.array([
    -12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
    -10690763975 / 1880347072, 701980252875 / 199316789632,
    -1453857185 / 822651844, 69997945 / 29380423,
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
_PI_BETA = 0.04
_PI_EXP = 0.2 - 0.75 * _PI_BETA
MIN_STEP_FRACTION = 1e-14


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """Gradient-flow states on the output grid merged with all accepted steps."""

    problem_name: str
    times: np.ndarray
    states: np.ndarray
    f_values: np.ndarray
    grad_norms: np.ndarray
    energy_integral: np.ndarray
    horizon: float
    tol: float
    step_count: int
    reject_count: int

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def csv_header(self) -> list[str]:
        return ["t", *(f"x_{i}" for i in range(self.dim)), "F", "grad_norm", "energy_integral"]

    def csv_rows(self):
        for k in range(self.times.shape[0]):
            yield (self.times[k], *self.states[k], self.f_values[k],
                   self.grad_norms[k], self.energy_integral[k])

    def to_csv(self, target) -> None:
        _csv.write_rows(target, self.csv_header(), self.csv_rows())


@dataclass(frozen=True)
class FlowVerdict:
    """Tail-window observations on ``[T(1 - window_fraction), T]``.

    These are statements about the finite horizon only.
    """

    f_converged: bool
    grad_vanishes: bool
    x_settled: bool
    x_bounded: float
    f_spread: float
    grad_tail_max: float
    tail_diameter: float
    window_start: float
    window_points: int
    eps: float


# Status codes returned by the integration core.
_OK, _UNDERFLOW, _BUDGET, _OVERFLOW = 0, 1, 2, 3


def _dopri_core(kid, kp, x0, horizon, tol, grid, max_steps):
    """Adaptive DOPRI5 on the state augmented with the energy integral.

    The objective is reached through the module-level ``_grad_kernel`` and
    ``_eval_kernel`` switches, which lets numba compile and cache this
    function for the built-in problems. Custom problems run the same code
    as plain Python with those two names rebound (see :func:`_python_core`).
    Returns ``(status, t, n_out, steps, rejects, T, Y, G, F)`` where rows
    ``[:n_out]`` of the output buffers hold times, augmented states,
    squared gradient norms and objective values.
    """
    d = x0.shape[0]
    n = d + 1
    cap = grid.shape[0] + 256
    T = np.empty(cap)
    Y = np.empty((cap, n))
    G = np.empty(cap)
    F = np.empty(cap)
    K = np.empty((7, n))

    y = np.empty(n)
    y[:d] = x0
    y[d] = 0.0
    g = _grad_kernel(kid, kp, x0)
    K[0, :d] = -g
    K[0, d] = np.dot(g, g)
    T[0] = 0.0
    Y[0] = y
    G[0] = K[0, d]
    F[0] = _eval_kernel(kid, kp, x0)
    n_out = 1
    gi = 1

    # initial step heuristic
    sc = tol + tol * np.abs(y)
    d0 = np.sqrt(np.mean((y / sc) ** 2))
    d1 = np.sqrt(np.mean((K[0] / sc) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, horizon)
    y1 = y + h0 * K[0]
    g = _grad_kernel(kid, kp, y1[:d])
    f1 = np.empty(n)
    f1[:d] = -g
    f1[d] = np.dot(g, g)
    d2 = np.sqrt(np.mean(((f1 - K[0]) / sc) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100.0 * h0, h1, horizon)

    t = 0.0
    facold = 1e-4
    just_rejected = False
    steps = 0
    rejects = 0
    n_grid = grid.shape[0]

    while t < horizon:
        if steps + rejects >= max_steps:
            return _BUDGET, t, n_out, steps, rejects, T, Y, G, F
        if h < MIN_STEP_FRACTION * horizon:
            return _UNDERFLOW, t, n_out, steps, rejects, T, Y, G, F
        last = t + 1.01 * h >= horizon
        if last:
            h = horizon - t

        y_new = y
        for i in range(1, 7):
            if i < 6:
                ys = y + h * np.dot(_A[i - 1, :i], K[:i])
            else:
                ys = y + h * np.dot(_B, K[:6])
                y_new = ys
            g = _grad_kernel(kid, kp, ys[:d])
            K[i, :d] = -g
            K[i, d] = np.dot(g, g)

        sc = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean((h * np.dot(_E, K) / sc) ** 2))
        if not (np.isfinite(err) and np.isfinite(np.sum(y_new))):
            return _OVERFLOW, t + h, n_out, steps, rejects, T, Y, G, F

        if err <= 1.0:
            steps += 1
            t_new = horizon if last else t + h
            # room for this step plus every grid point not yet emitted
            need = n_out + 1 + (n_grid - gi)
            if need > T.shape[0]:
                new_cap = max(2 * T.shape[0], need)
                T2 = np.empty(new_cap)
                Y2 = np.empty((new_cap, n))
                G2 = np.empty(new_cap)
                F2 = np.empty(new_cap)
                T2[:n_out] = T[:n_out]
                Y2[:n_out] = Y[:n_out]
                G2[:n_out] = G[:n_out]
                F2[:n_out] = F[:n_out]
                T, Y, G, F = T2, Y2, G2, F2

            # grid points strictly inside the step come from the dense interpolant
            if gi < n_grid and grid[gi] < t_new:
                r2 = y_new - y
                r3 = h * K[0] - r2
                r4 = r2 - h * K[6] - r3
                r5 = h * np.dot(_D, K)
                while gi < n_grid and grid[gi] < t_new:
                    if grid[gi] > t:
                        th = (grid[gi] - t) / h
                        th1 = 1.0 - th
                        yd = y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))
                        gd = _grad_kernel(kid, kp, yd[:d])
                        T[n_out] = grid[gi]
                        Y[n_out] = yd
                        G[n_out] = np.dot(gd, gd)
                        F[n_out] = _eval_kernel(kid, kp, yd[:d])
                        n_out += 1
                    gi += 1
            while gi < n_grid and grid[gi] <= t_new:
                gi += 1
            T[n_out] = t_new
            Y[n_out] = y_new
            G[n_out] = K[6, d]
            F[n_out] = _eval_kernel(kid, kp, y_new[:d])
            n_out += 1

            if err > 0.0:
                factor = SAFETY * facold ** _PI_BETA / err ** _PI_EXP
            else:
                factor = MAX_FACTOR
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            if just_rejected:
                factor = min(factor, 1.0)
            facold = max(err, 1e-4)
            just_rejected = False
            t = t_new
            y = y_new.copy()
            K[0] = K[6]
            h *= factor
        else:
            rejects += 1
            just_rejected = True
            h *= max(MIN_FACTOR, SAFETY / err ** _PI_EXP)

    return _OK, t, n_out, steps, rejects, T, Y, G, F


_dopri_jit = numba.njit(cache=True)(_dopri_core)


def _python_core(problem: Problem):
    """``_dopri_core`` with the kernel switches bound to the problem's callables."""
    env = dict(globals())
    env["_grad_kernel"] = lambda kid, kp, x: np.asarray(problem.grad_fn(x), dtype=np.float64)
    env["_eval_kernel"] = lambda kid, kp, x: float(problem.eval_fn(x))
    return types.FunctionType(_dopri_core.__code__, env, "_dopri_core")


def integrate(problem: Problem, x0, horizon: float, tol: float = 1e-9,
              n_grid: int = 200, max_steps: int = 5_000_000) -> FlowTrajectory:
    """Integrate the gradient flow of ``problem`` from ``x0`` on ``[0, horizon]``.

    ``tol`` serves as both the absolute and the relative local error
    tolerance of the embedded pair. The returned trajectory holds the
    ``n_grid + 1`` equispaced output times together with every accepted
    step, in increasing order. Problems whose objective and gradient are
    numba-compiled run the same algorithm in compiled form.

    Raises
    ------
    StiffnessError
        If the controller asks for a step below ``1e-14 * horizon``, or the
        step budget ``max_steps`` is exhausted.
    NumericOverflowError
        If the state, gradient or objective stops being finite.
    """
    x0 = check_vector(x0, problem.dim, name="x0")
    horizon = check_positive(horizon, "horizon")
    tol = check_positive(tol, "tol")
    if not (1e-12 <= tol <= 1e-2):
        raise ArgumentError(f"tol must lie in [1e-12, 1e-2], got {tol}")
    if n_grid < 200:
        raise ArgumentError("n_grid must be at least 200")
    problem.eval(x0)
    problem.grad(x0)

    grid = np.linspace(0.0, horizon, n_grid + 1)
    if problem.compiled:
        core, kid, kp = _dopri_jit, problem.kernel_id, problem.kernel_params
    else:
        core, kid, kp = _python_core(problem), -1, np.empty(0)
    status, t_stop, n_out, steps, rejects, T, Y, G, F = core(
        kid, kp, x0, horizon, tol, grid, max_steps)
    if status == _UNDERFLOW:
        raise StiffnessError(f"step size underflowed below {MIN_STEP_FRACTION:g}*horizon at t={t_stop}")
    if status == _BUDGET:
        raise StiffnessError(f"step budget of {max_steps} exhausted at t={t_stop}")
    F = F[:n_out]
    if status == _OVERFLOW or not np.all(np.isfinite(F)) or not np.all(np.isfinite(G[:n_out])):
        raise NumericOverflowError(f"{problem.name}: non-finite state or gradient near t={t_stop}")

    d = problem.dim
    return FlowTrajectory(
        problem_name=problem.name,
        times=T[:n_out].copy(),
        states=Y[:n_out, :d].copy(),
        f_values=F.copy(),
        grad_norms=np.sqrt(G[:n_out]),
        energy_integral=Y[:n_out, d].copy(),
        horizon=horizon,
        tol=tol,
        step_count=steps,
        reject_count=rejects,
    )


def energy_residual(traj: FlowTrajectory, problem: Problem) -> float:
    """Worst normalised gap ``|E(t_k) - (F(x(0)) - F(x(t_k)))| / (1 + |F(x(0))|)``."""
    f = np.array([problem.eval_fn(x) for x in traj.states], dtype=np.float64)
    gap = np.abs(traj.energy_integral - (f[0] - f))
    return float(gap.max() / (1.0 + abs(f[0])))


def detect_flow_convergence(traj: FlowTrajectory, window_fraction: float = 0.25,
                            eps: float = 1e-6) -> FlowVerdict:
    if not (0.0 < window_fraction < 1.0):
        raise ArgumentError(f"window_fraction must lie in (0, 1), got {window_fraction}")
    eps = check_positive(eps, "eps")
    start = traj.horizon * (1.0 - window_fraction)
    mask = traj.times >= start
    n = int(mask.sum())
    if n < 2:
        raise ArgumentError(f"tail window holds {n} grid point(s); need at least 2")

    f_tail = traj.f_values[mask]
    f_spread = float(f_tail.max() - f_tail.min())
    grad_max = float(traj.grad_norms[mask].max())
    diameter = _diameter(traj.states[mask])
    return FlowVerdict(
        f_converged=f_spread <= eps * (1.0 + abs(traj.f_values[0])),
        grad_vanishes=grad_max <= eps,
        x_settled=diameter <= eps,
        x_bounded=float(np.linalg.norm(traj.states, axis=1).max()),
        f_spread=f_spread,
        grad_tail_max=grad_max,
        tail_diameter=diameter,
        window_start=float(start),
        window_points=n,
        eps=eps,
    )


def _diameter(points: np.ndarray, block: int = 1024) -> float:
    """Largest pairwise Euclidean distance, exact."""
    points = np.unique(points, axis=0)
    n, d = points.shape
    if n < 2:
        return 0.0
    if d == 1:
        return float(points[-1, 0] - points[0, 0])
    if d == 2 and n > 3:
        from scipy.spatial import ConvexHull, QhullError
        try:
            hull = points[ConvexHull(points).vertices]
        except (QhullError, ValueError):
            hull = None  # collinear cloud
        if hull is not None:
            return _calipers(hull)
    best = 0.0
    for i in range(0, n, block):
        chunk = points[i:i + block]
        diff = chunk[:, None, :] - points[None, :, :]
        best = max(best, float(np.sqrt((diff ** 2).sum(axis=2)).max()))
    return best


def _calipers(hull: np.ndarray) -> float:
    """Diameter of a convex polygon given counter-clockwise, by rotating calipers."""
    m = hull.shape[0]
    if m < 3:
        return float(np.linalg.norm(hull[0] - hull[-1]))

    def area2(i, j, k):
        a, b, c = hull[i], hull[j], hull[k]
        return abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    best = 0.0
    j = 1
    for i in range(m):
        i1 = (i + 1) % m
        while area2(i, i1, (j + 1) % m) > area2(i, i1, j):
            j = (j + 1) % m
        best = max(best,
                   float(np.linalg.norm(hull[i] - hull[j])),
                   float(np.linalg.norm(hull[i1] - hull[j])))
    return best
