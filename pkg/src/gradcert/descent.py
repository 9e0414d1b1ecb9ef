"""Plain gradient descent ``x_{n+1} = x_n - gamma_n grad F(x_n)`` with a full log.

Containment in the region ``C`` is monitored, never enforced. Divergence is
a recorded outcome: the log stops at the last finite iterate and says why.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _csv
from ._validation import check_alpha, check_count, check_positive, check_vector
from .exceptions import ArgumentError
from .objective import ConvexRegion, Problem
from .schedule import Schedule, gamma

__all__ = ["DescentLog", "StepMargin", "DescentVerdict", "run", "step_margins",
           "detect_descent_convergence", "STATIONARY_THRESHOLD"]

STATIONARY_THRESHOLD = 1e-14
HORIZON, OVERFLOW, STATIONARY = "horizon", "overflow", "stationary"


@dataclass(frozen=True, eq=False)
class DescentLog:
    """Iterates ``x_0..x_N`` and per-step quantities.

    ``gammas[n]`` and ``weighted_sum[n]`` belong to step ``n`` (from ``x_n`` to
    ``x_{n+1}``), so both have length ``N``; ``weighted_sum[n]`` is
    ``sum_{k<=n} gamma_k |grad F(x_k)|^2``.
    """

    problem_name: str
    iterates: np.ndarray
    f_values: np.ndarray
    grad_norms: np.ndarray
    gammas: np.ndarray
    weighted_sum: np.ndarray
    in_region: np.ndarray | None
    stopped_reason: str
    schedule: Schedule
    region: ConvexRegion | None = None
    n_requested: int | None = None

    @property
    def n_steps(self) -> int:
        return self.gammas.shape[0]

    @property
    def dim(self) -> int:
        return self.iterates.shape[1]

    @property
    def total_weighted_sum(self) -> float:
        return float(self.weighted_sum[-1]) if self.n_steps else 0.0

    def csv_header(self) -> list[str]:
        return ["n", *(f"x_{i}" for i in range(self.dim)), "F", "grad_norm", "gamma",
                "weighted_sum", "in_region"]

    def csv_rows(self):
        N = self.n_steps
        for n in range(N + 1):
            yield (n, *self.iterates[n], self.f_values[n], self.grad_norms[n],
                   self.gammas[n] if n < N else None,
                   self.weighted_sum[n] if n < N else None,
                   bool(self.in_region[n]) if self.in_region is not None else None)

    def to_csv(self, target) -> None:
        _csv.write_rows(target, self.csv_header(), self.csv_rows())


@dataclass(frozen=True)
class StepMargin:
    n: int
    lhs: float
    bound: float
    slack: float
    inside: bool


@dataclass(frozen=True)
class DescentVerdict:
    f_cauchy: bool
    weighted_sum_plateau: bool
    weighted_sum_increase: float
    min_grad_tail: float
    inf_f_observed: float
    window: int
    eps: float


def run(problem: Problem, x0, schedule: Schedule, n_steps: int,
        region: ConvexRegion | None = None) -> DescentLog:
    """Iterate for ``n_steps`` steps, or until the gradient norm drops below
    ``1e-14`` or a value stops being finite."""
    x = check_vector(x0, problem.dim, name="x0")
    n_steps = check_count(n_steps, "n_steps")
    if region is not None:
        if region.dim != problem.dim:
            raise ArgumentError(f"region has dimension {region.dim}, problem has {problem.dim}")
        if not region.contains(x):
            raise ArgumentError("x0 lies outside the region")
    if schedule.length is not None and schedule.length < n_steps:
        raise ArgumentError(f"explicit schedule has {schedule.length} steps, {n_steps} requested")

    f = problem.eval(x)
    g = problem.grad(x)
    gn = float(np.linalg.norm(g))
    iterates, f_values, grad_norms, gammas, wsum = [x], [f], [gn], [], []
    inside = [region.contains(x)] if region is not None else None
    total = 0.0
    reason = HORIZON

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_steps):
            if gn < STATIONARY_THRESHOLD:
                reason = STATIONARY
                break
            step = gamma(schedule, n)
            x_new = x - step * g
            try:
                f_new = float(problem.eval_fn(x_new))
                g_new = np.asarray(problem.grad_fn(x_new), dtype=np.float64)
            except (OverflowError, FloatingPointError):
                reason = OVERFLOW
                break
            gn_new = float(np.linalg.norm(g_new))
            if not (np.all(np.isfinite(x_new)) and np.isfinite(f_new) and np.isfinite(gn_new)):
                reason = OVERFLOW
                break
            total += step * gn * gn
            gammas.append(step)
            wsum.append(total)
            x, f, g, gn = x_new, f_new, g_new, gn_new
            iterates.append(x)
            f_values.append(f)
            grad_norms.append(gn)
            if inside is not None:
                inside.append(region.contains(x))
        else:
            if gn < STATIONARY_THRESHOLD:
                reason = STATIONARY

    return DescentLog(
        problem_name=problem.name,
        iterates=np.array(iterates),
        f_values=np.array(f_values),
        grad_norms=np.array(grad_norms),
        gammas=np.array(gammas),
        weighted_sum=np.array(wsum),
        in_region=np.array(inside, dtype=bool) if inside is not None else None,
        stopped_reason=reason,
        schedule=schedule,
        region=region,
        n_requested=n_steps,
    )


def step_margins(log: DescentLog, c: float, alpha: float) -> list[StepMargin]:
    """Per-step gap to the descent bound
    ``-gamma |g|^2 + c / (1 + alpha) * gamma^(1 + alpha) |g|^(1 + alpha)``.

    ``inside`` marks steps whose two endpoints lie in the region; for a
    convex region the whole segment then does too, which is where the
    bound is guaranteed. Without a region every step counts as inside.
    """
    c = check_positive(c, "c", allow_zero=True)
    alpha = check_alpha(alpha)
    out = []
    for n in range(log.n_steps):
        step = float(log.gammas[n])
        gn = float(log.grad_norms[n])
        lhs = float(log.f_values[n + 1] - log.f_values[n])
        bound = -step * gn * gn + c / (1.0 + alpha) * step ** (1.0 + alpha) * gn ** (1.0 + alpha)
        inside = True if log.in_region is None else bool(log.in_region[n] and log.in_region[n + 1])
        out.append(StepMargin(n=n, lhs=lhs, bound=bound, slack=bound - lhs, inside=inside))
    return out


def clip_window(log: DescentLog, window: int) -> int:
    """Largest usable window not above ``window`` (stationary runs take any window)."""
    if log.stopped_reason == STATIONARY:
        return window
    return max(1, min(window, log.n_steps))


def iterate_box(log: DescentLog) -> ConvexRegion:
    """Bounding box of the iterates, padded so that it always has volume."""
    lo, hi = log.iterates.min(axis=0), log.iterates.max(axis=0)
    pad = np.maximum(1e-3, 0.05 * (hi - lo))
    return ConvexRegion.box(lo - pad, hi + pad)


def margin_ok(m: StepMargin, tol_check: float = 1e-12) -> bool:
    return m.slack >= -tol_check * (1.0 + abs(m.lhs))


def detect_descent_convergence(log: DescentLog, window: int, eps: float) -> DescentVerdict:
    """Tail observations over the last ``window`` steps.

    A run that stopped at a stationary point is treated as continuing at
    that point up to the requested number of steps, so the window sits at
    the end of that extended sequence. An overflowed run has its window
    clipped to what was recorded and never counts as converged.
    """
    window = check_count(window, "window")
    eps = check_positive(eps, "eps")
    N = log.n_steps
    if log.stopped_reason == STATIONARY:
        length = max(N, log.n_requested or N)
    else:
        length = N
        if window > N and log.stopped_reason == HORIZON:
            raise ArgumentError(f"window {window} exceeds the {N} recorded steps")
    start = min(max(0, length - window), N)

    f_tail = log.f_values[start:]
    prefix = np.concatenate([[0.0], log.weighted_sum])
    increase = float(prefix[N] - prefix[start])
    f_cauchy = float(f_tail.max() - f_tail.min()) <= eps * (1.0 + abs(log.f_values[0]))
    plateau = increase <= eps
    if log.stopped_reason == OVERFLOW:
        f_cauchy = plateau = False
    return DescentVerdict(
        f_cauchy=bool(f_cauchy),
        weighted_sum_plateau=bool(plateau),
        weighted_sum_increase=increase,
        min_grad_tail=float(log.grad_norms[start:].min()),
        inf_f_observed=float(log.f_values.min()),
        window=window,
        eps=eps,
    )
