"""scikit-learn style wrappers around the flow, descent and Hölder tools.

The "data" of these estimators is a start point (or a batch of start
points), not a feature matrix: ``fit`` runs from one start point and keeps
the run and its certificate, ``predict`` maps each row of ``X`` to the point
reached from it. ``get_params``/``set_params``/``clone`` come from
:class:`sklearn.base.BaseEstimator`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import certify, descent, flow, holder
from .exceptions import ArgumentError
from .objective import ConvexRegion, Problem, parse_problem_spec, parse_region_spec
from .schedule import Schedule, classify, parse_schedule_spec

__all__ = ["GradientFlow", "GradientDescent", "HolderEstimator"]


def _problem(spec) -> Problem:
    return spec if isinstance(spec, Problem) else parse_problem_spec(spec)


def _region(spec, dim) -> ConvexRegion | None:
    if spec is None or isinstance(spec, ConvexRegion):
        return spec
    return parse_region_spec(spec, dim)


def _start(X, problem: Problem) -> np.ndarray:
    if X is None:
        return problem.start
    X = check_array(X, ensure_2d=False, dtype=np.float64).reshape(-1)
    if X.shape[0] != problem.dim:
        raise ArgumentError(f"start point has {X.shape[0]} coordinates, expected {problem.dim}")
    return X


def _rows(X, problem: Problem) -> np.ndarray:
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != problem.dim:
        raise ArgumentError(f"X has {X.shape[1]} columns, expected {problem.dim}")
    return X


class GradientFlow(BaseEstimator):
    """Integrate the gradient flow on ``[0, horizon]`` and certify it.

    Attributes after ``fit``: ``trajectory_``, ``verdict_``, ``certificate_``,
    ``x_final_``, ``energy_residual_``.
    """

    def __init__(self, problem="quadratic", horizon=10.0, tol=1e-9, window_fraction=0.25,
                 eps=1e-6, theorem="GF-2.1"):
        self.problem = problem
        self.horizon = horizon
        self.tol = tol
        self.window_fraction = window_fraction
        self.eps = eps
        self.theorem = theorem

    def fit(self, X=None, y=None):
        problem = _problem(self.problem)
        traj = flow.integrate(problem, _start(X, problem), self.horizon, self.tol)
        self.problem_ = problem
        self.trajectory_ = traj
        self.verdict_ = flow.detect_flow_convergence(traj, self.window_fraction, self.eps)
        self.certificate_ = certify.certify_flow(problem, traj, self.verdict_, self.theorem)
        self.energy_residual_ = flow.energy_residual(traj, problem)
        self.x_final_ = traj.states[-1].copy()
        return self

    def predict(self, X):
        """State at time ``horizon`` from each row of ``X``."""
        check_is_fitted(self, "problem_")
        X = _rows(X, self.problem_)
        return np.array([flow.integrate(self.problem_, x, self.horizon, self.tol).states[-1]
                         for x in X])


class GradientDescent(BaseEstimator):
    """Run ``x_{n+1} = x_n - gamma_n grad F(x_n)`` and certify the run.

    ``alpha`` is the Hölder exponent used for the schedule classification,
    the sampled constant and the descent-inequality audit. Without a
    ``region`` the padded bounding box of the iterates is used.
    """

    def __init__(self, problem="quadratic", schedule="pow:a=1,beta=0.6", n_steps=1000,
                 region=None, alpha=1.0, n_pairs=10_000, seed=0, window=100, eps=1e-8,
                 theorem="GD-3.1"):
        self.problem = problem
        self.schedule = schedule
        self.n_steps = n_steps
        self.region = region
        self.alpha = alpha
        self.n_pairs = n_pairs
        self.seed = seed
        self.window = window
        self.eps = eps
        self.theorem = theorem

    def _schedule(self) -> Schedule:
        return self.schedule if isinstance(self.schedule, Schedule) else parse_schedule_spec(self.schedule)

    def fit(self, X=None, y=None):
        problem = _problem(self.problem)
        sched = self._schedule()
        x0 = _start(X, problem)
        region = _region(self.region, problem.dim)
        log = descent.run(problem, x0, sched, self.n_steps, region)
        if region is None:
            region = descent.iterate_box(log)
            log = descent.run(problem, x0, sched, self.n_steps, region)
        est = holder.estimate_c(problem, region, self.alpha, self.n_pairs, self.seed)
        margins = descent.step_margins(log, holder.SAFETY_FACTOR * est.c_hat, self.alpha)
        window = descent.clip_window(log, self.window)
        self.problem_ = problem
        self.schedule_ = sched
        self.log_ = log
        self.holder_ = est
        self.margins_ = margins
        self.verdict_ = descent.detect_descent_convergence(log, window, self.eps)
        self.certificate_ = certify.certify_descent(
            problem, log, classify(sched, self.alpha), est, margins, self.verdict_, self.theorem,
            seed=self.seed)
        self.x_final_ = log.iterates[-1].copy()
        return self

    def predict(self, X):
        """Last iterate reached from each row of ``X``."""
        check_is_fitted(self, "problem_")
        X = _rows(X, self.problem_)
        return np.array([descent.run(self.problem_, x, self.schedule_, self.n_steps).iterates[-1]
                         for x in X])


class HolderEstimator(BaseEstimator):
    """Sampled one-sided Hölder constant, with the exponent fitted when ``alpha`` is None.

    ``fit(X)`` with ``X`` of shape ``(n, 2 d)`` uses the rows as explicit
    pairs ``(x, y)`` instead of sampling; this needs ``alpha``.
    """

    def __init__(self, problem="quadratic", region="box:-1,1", alpha=None, n_pairs=10_000,
                 n_bins=10, seed=0, norm="l2"):
        self.problem = problem
        self.region = region
        self.alpha = alpha
        self.n_pairs = n_pairs
        self.n_bins = n_bins
        self.seed = seed
        self.norm = norm

    def fit(self, X=None, y=None):
        problem = _problem(self.problem)
        if X is not None:
            if self.alpha is None:
                raise ArgumentError("explicit pairs need a fixed alpha")
            X = check_array(X, dtype=np.float64)
            d = problem.dim
            if X.shape[1] != 2 * d:
                raise ArgumentError(f"pairs must have {2 * d} columns, got {X.shape[1]}")
            est = holder.estimate_c_from_pairs(problem, X[:, :d], X[:, d:], self.alpha, self.norm)
        else:
            region = _region(self.region, problem.dim)
            if self.alpha is None:
                est = holder.estimate_alpha(problem, region, self.n_pairs, self.n_bins, self.seed, self.norm)
            else:
                est = holder.estimate_c(problem, region, self.alpha, self.n_pairs, self.seed, self.norm)
        self.estimate_ = est
        self.alpha_ = est.alpha
        self.c_hat_ = est.c_hat
        return self
