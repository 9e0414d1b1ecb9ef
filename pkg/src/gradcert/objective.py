"""Differentiable objectives, convex regions, and the built-in problem suite.

Every problem carries an analytic gradient; :func:`check_gradient` compares
it against central finite differences. Five families are available through
:func:`make_problem`:

``quadratic``
    ``F(x) = 0.5 x^T A x + b^T x`` for a symmetric matrix ``A``.
``rosenbrock``
    The chained Rosenbrock function with ``a = 1, b = 100``.
``himmelblau``
    Himmelblau's two-dimensional function with four global minima.
``ann_softplus``
    Mean squared error of a width-3 softplus network fitted to ``|u|``.
``mexican_hat``
    A C-infinity potential whose gradient-flow orbits spiral onto the
    unit circle without converging to a point.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from ._validation import check_positive, check_vector
from .exceptions import ArgumentError, NumericOverflowError

__all__ = [
    "Problem",
    "ConvexRegion",
    "check_gradient",
    "contains",
    "make_problem",
    "parse_problem_spec",
    "parse_region_spec",
    "PROBLEM_NAMES",
]


@dataclass(frozen=True, eq=False)
class Problem:
    """A C^1 objective with its analytic gradient.

    ``start`` is the conventional starting point used by the suite-wide
    checks; ``params`` records the construction arguments so that the
    problem can be rebuilt from :meth:`spec`.
    """

    name: str
    dim: int
    eval_fn: Callable[[np.ndarray], float] = field(repr=False)
    grad_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lower_bound: float | None = None
    minimizer: np.ndarray | None = None
    start: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    # (alpha, c) known analytically to satisfy the one-sided Hölder condition on all of R^d
    holder_bound: tuple[float, float] | None = None
    kernel_id: int = -1
    kernel_params: np.ndarray | None = field(default=None, repr=False)

    def eval(self, x) -> float:
        x = check_vector(x, self.dim)
        value = float(self.eval_fn(x))
        if not math.isfinite(value):
            raise NumericOverflowError(f"{self.name}: non-finite objective value at x={x}")
        return value

    def grad(self, x) -> np.ndarray:
        x = check_vector(x, self.dim)
        g = np.asarray(self.grad_fn(x), dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise NumericOverflowError(f"{self.name}: non-finite gradient at x={x}")
        return g

    def __call__(self, x) -> float:
        return self.eval(x)

    @property
    def compiled(self) -> bool:
        """True for built-in problems backed by numba kernels."""
        return self.kernel_id >= 0

    def spec(self) -> str:
        """Spec string accepted by :func:`parse_problem_spec`."""
        if not self.params:
            return self.name
        parts = [f"{key}={_format_param(value)}" for key, value in self.params.items()]
        return f"{self.name}:" + ",".join(parts)


def _format_param(value) -> str:
    arr = np.asarray(value)
    if arr.ndim == 0:
        return repr(arr.item())
    if arr.ndim == 1:
        return ",".join(repr(float(v)) for v in arr)
    return ";".join(",".join(repr(float(v)) for v in row) for row in arr)


def check_gradient(problem: Problem, x, h: float = 1e-5) -> float:
    """Worst coordinate-wise discrepancy between analytic and central-difference gradients.

    The error on coordinate ``i`` is ``|g_i - fd_i| / max(1, |g_i|)``:
    relative where the gradient is large, absolute near stationary points
    so that a vanishing gradient does not blow up the ratio.
    """
    h = check_positive(h, "h")
    x = check_vector(x, problem.dim)
    g = problem.grad(x)
    worst = 0.0
    for i in range(problem.dim):
        step = np.zeros(problem.dim)
        step[i] = h
        fd = (problem.eval(x + step) - problem.eval(x - step)) / (2.0 * h)
        err = abs(g[i] - fd) / max(1.0, abs(g[i]))
        worst = max(worst, err)
    return worst


# --------------------------------------------------------------------------
# Convex regions


@dataclass(frozen=True, eq=False)
class ConvexRegion:
    """Closed axis-aligned box or closed Euclidean ball in R^d."""

    kind: str
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None

    @classmethod
    def box(cls, lower, upper) -> "ConvexRegion":
        lower = check_vector(lower, name="lower")
        upper = check_vector(upper, lower.shape[0], name="upper")
        if np.any(lower > upper):
            raise ArgumentError("box requires lower <= upper in every coordinate")
        return cls(kind="box", lower=lower, upper=upper)

    @classmethod
    def ball(cls, center, radius: float) -> "ConvexRegion":
        center = check_vector(center, name="center")
        radius = check_positive(radius, "radius", allow_zero=True)
        return cls(kind="ball", center=center, radius=radius)

    @property
    def dim(self) -> int:
        return (self.lower if self.kind == "box" else self.center).shape[0]

    @property
    def diameter(self) -> float:
        if self.kind == "box":
            return float(np.linalg.norm(self.upper - self.lower))
        return 2.0 * self.radius

    @property
    def has_volume(self) -> bool:
        if self.kind == "box":
            return bool(np.all(self.upper > self.lower))
        return self.radius > 0

    def contains(self, x) -> bool:
        x = check_vector(x, self.dim)
        if self.kind == "box":
            return bool(np.all(x >= self.lower) and np.all(x <= self.upper))
        return bool(np.linalg.norm(x - self.center) <= self.radius)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` points uniformly from the region, shape ``(n, dim)``."""
        d = self.dim
        if self.kind == "box":
            u = rng.random((n, d))
            return self.lower + u * (self.upper - self.lower)
        z = rng.standard_normal((n, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = self.radius * rng.random(n) ** (1.0 / d)
        return self.center + z * r[:, None]

    def spec(self) -> str:
        if self.kind == "box":
            return f"box:lo={_format_param(self.lower)},hi={_format_param(self.upper)}"
        return f"ball:center={_format_param(self.center)},radius={self.radius!r}"


def contains(region: ConvexRegion, x) -> bool:
    return region.contains(x)


# --------------------------------------------------------------------------
# Problem families
#
# Each built-in family is a pair of numba kernels ``(params, x)``; the switch
# functions ``_eval_kernel`` / ``_grad_kernel`` dispatch on a family id so that
# the compiled flow integrator can call any built-in problem without taking
# functions as arguments (which would defeat numba's on-disk cache).

QUADRATIC, ROSENBROCK, HIMMELBLAU, ANN_SOFTPLUS, MEXICAN_HAT = range(5)


@numba.njit(cache=True)
def _quadratic_parts(kp, n):
    A = kp[1:1 + n * n].reshape((n, n))
    b = kp[1 + n * n:1 + n * n + n]
    return A, b


@numba.njit(cache=True)
def _quadratic_eval(kp, x):
    A, b = _quadratic_parts(kp, x.shape[0])
    return 0.5 * np.dot(x, np.dot(A, x)) + np.dot(b, x)


@numba.njit(cache=True)
def _quadratic_grad(kp, x):
    A, b = _quadratic_parts(kp, x.shape[0])
    return np.dot(A, x) + b


@numba.njit(cache=True)
def _rosenbrock_eval(kp, x):
    return np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2)


@numba.njit(cache=True)
def _rosenbrock_grad(kp, x):
    out = np.zeros_like(x)
    t = x[1:] - x[:-1] ** 2
    out[:-1] += -400.0 * x[:-1] * t - 2.0 * (1.0 - x[:-1])
    out[1:] += 200.0 * t
    return out


@numba.njit(cache=True)
def _himmelblau_eval(kp, x):
    return (x[0] ** 2 + x[1] - 11.0) ** 2 + (x[0] + x[1] ** 2 - 7.0) ** 2


@numba.njit(cache=True)
def _himmelblau_grad(kp, x):
    p = x[0] ** 2 + x[1] - 11.0
    q = x[0] + x[1] ** 2 - 7.0
    out = np.empty(2)
    out[0] = 4.0 * x[0] * p + 2.0 * q
    out[1] = 2.0 * p + 4.0 * x[1] * q
    return out


# Training set for the softplus network: ten equispaced inputs on [-1, 1].
ANN_INPUTS = -1.0 + 2.0 * np.arange(10) / 9.0
ANN_TARGETS = np.abs(ANN_INPUTS)
ANN_WIDTH = 3


@numba.njit(cache=True)
def _softplus(z):
    return max(z, 0.0) + math.log1p(math.exp(-abs(z)))


@numba.njit(cache=True)
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@numba.njit(cache=True)
def _ann_residuals(theta):
    k = ANN_WIDTH
    m = ANN_INPUTS.shape[0]
    resid = np.empty(m)
    for j in range(m):
        y = theta[3 * k]
        for i in range(k):
            y += theta[2 * k + i] * _softplus(theta[i] * ANN_INPUTS[j] + theta[k + i])
        resid[j] = y - ANN_TARGETS[j]
    return resid


@numba.njit(cache=True)
def _ann_eval(kp, theta):
    resid = _ann_residuals(theta)
    return np.mean(resid ** 2)


@numba.njit(cache=True)
def _ann_grad(kp, theta):
    k = ANN_WIDTH
    m = ANN_INPUTS.shape[0]
    resid = _ann_residuals(theta)
    out = np.zeros(3 * k + 1)
    scale = 2.0 / m
    for j in range(m):
        u = ANN_INPUTS[j]
        rj = scale * resid[j]
        for i in range(k):
            z = theta[i] * u + theta[k + i]
            sig = _sigmoid(z)
            v = theta[2 * k + i]
            out[i] += rj * v * sig * u
            out[k + i] += rj * v * sig
            out[2 * k + i] += rj * _softplus(z)
        out[3 * k] += rj
    return out


# Beyond this value of 1/(1 - r^2) the radial factor exp(-1/(1 - r^2))
# underflows to zero in float64.
_MEXICAN_HAT_CUTOFF = 740.0

# Default multiplier on the potential. Scaling F rescales time along the
# same orbits; at unit scale the flow from (0.5, 0) reaches the spiral
# valley by t ~ 10 and then creeps at speed ~6e-7, so the winding is
# invisible on any practical horizon.
MEXICAN_HAT_SCALE = 800.0


@numba.njit(cache=True)
def _mexican_hat_eval(kp, x):
    r2 = x[0] * x[0] + x[1] * x[1]
    s = 1.0 - r2
    if s <= 0.0 or 1.0 / s > _MEXICAN_HAT_CUTOFF:
        return 0.0
    inv_s = 1.0 / s
    h = 4.0 * r2 * r2 / (4.0 * r2 * r2 + s ** 4)
    return kp[0] * math.exp(-inv_s) * (1.0 - h * math.sin(math.atan2(x[1], x[0]) - inv_s))


@numba.njit(cache=True)
def _mexican_hat_grad(kp, x):
    out = np.zeros(2)
    r2 = x[0] * x[0] + x[1] * x[1]
    s = 1.0 - r2
    if s <= 0.0 or 1.0 / s > _MEXICAN_HAT_CUTOFF:
        return out
    inv_s = 1.0 / s
    g = kp[0] * math.exp(-inv_s)
    phi = math.atan2(x[1], x[0]) - inv_s
    sin_phi = math.sin(phi)
    cos_phi = math.cos(phi)
    D = 4.0 * r2 * r2 + s ** 4
    h = 4.0 * r2 * r2 / D
    # dF/dr divided by r, and dF/dtheta divided by r^2; both stay finite at r = 0.
    dD_over_r = 16.0 * r2 - 8.0 * s ** 3
    dh_over_r = (16.0 * r2 * D - 4.0 * r2 * r2 * dD_over_r) / (D * D)
    radial = (-2.0 * g * inv_s * inv_s * (1.0 - h * sin_phi)
              - g * dh_over_r * sin_phi
              + 2.0 * g * h * cos_phi * inv_s * inv_s)
    angular = -g * cos_phi * 4.0 * r2 / D
    out[0] = radial * x[0] - angular * x[1]
    out[1] = radial * x[1] + angular * x[0]
    return out


@numba.njit(cache=True)
def _eval_kernel(kid, kp, x):
    if kid == QUADRATIC:
        return _quadratic_eval(kp, x)
    if kid == ROSENBROCK:
        return _rosenbrock_eval(kp, x)
    if kid == HIMMELBLAU:
        return _himmelblau_eval(kp, x)
    if kid == ANN_SOFTPLUS:
        return _ann_eval(kp, x)
    return _mexican_hat_eval(kp, x)


@numba.njit(cache=True)
def _grad_kernel(kid, kp, x):
    if kid == QUADRATIC:
        return _quadratic_grad(kp, x)
    if kid == ROSENBROCK:
        return _rosenbrock_grad(kp, x)
    if kid == HIMMELBLAU:
        return _himmelblau_grad(kp, x)
    if kid == ANN_SOFTPLUS:
        return _ann_grad(kp, x)
    return _mexican_hat_grad(kp, x)


_KERNELS = {
    QUADRATIC: (_quadratic_eval, _quadratic_grad),
    ROSENBROCK: (_rosenbrock_eval, _rosenbrock_grad),
    HIMMELBLAU: (_himmelblau_eval, _himmelblau_grad),
    ANN_SOFTPLUS: (_ann_eval, _ann_grad),
    MEXICAN_HAT: (_mexican_hat_eval, _mexican_hat_grad),
}


def _builtin(name, kid, kp, dim, **fields) -> Problem:
    kp = np.ascontiguousarray(kp, dtype=np.float64)
    f_kernel, g_kernel = _KERNELS[kid]
    return Problem(
        name, dim,
        eval_fn=lambda x: f_kernel(kp, x),
        grad_fn=lambda x: g_kernel(kp, x),
        kernel_id=kid, kernel_params=kp, **fields)


def quadratic(A=None, b=None, d: int | None = None, diag=None) -> Problem:
    """``0.5 x^T A x + b^T x``; ``A`` dense, or ``diag`` entries, or identity of size ``d``."""
    if A is not None:
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    elif diag is not None:
        A = np.diag(check_vector(diag, name="diag"))
    else:
        A = np.eye(int(d) if d is not None else 2)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ArgumentError(f"A must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ArgumentError("A contains non-finite entries")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ArgumentError("A must be symmetric")
    b = np.zeros(n) if b is None else check_vector(b, n, name="b")

    eig = np.linalg.eigvalsh(A)
    lower_bound = minimizer = None
    if eig[0] > 0:
        minimizer = -np.linalg.solve(A, b)
        lower_bound = float(0.5 * minimizer @ A @ minimizer + b @ minimizer)

    params = {"A": A}
    if np.any(b != 0):
        params["b"] = b
    kp = np.concatenate([[n], A.ravel(), b])
    return _builtin("quadratic", QUADRATIC, kp, n, lower_bound=lower_bound,
                    minimizer=minimizer, start=np.ones(n), params=params,
                    holder_bound=(1.0, max(float(eig[-1]), 0.0)))


def rosenbrock(d: int = 2) -> Problem:
    d = int(d)
    if d < 2:
        raise ArgumentError("rosenbrock needs d >= 2")
    start = np.ones(d)
    start[0::2] = -1.2
    params = {"d": d} if d != 2 else {}
    return _builtin("rosenbrock", ROSENBROCK, [], d, lower_bound=0.0,
                    minimizer=np.ones(d), start=start, params=params)


def himmelblau() -> Problem:
    return _builtin("himmelblau", HIMMELBLAU, [], 2, lower_bound=0.0,
                    minimizer=np.array([3.0, 2.0]), start=np.zeros(2))


def ann_softplus(seed: int = 0) -> Problem:
    """MSE loss of ``u -> sum_i v_i softplus(w_i u + b_i) + c`` on the fixed dataset.

    Parameter layout: ``[w_1..w_3, b_1..b_3, v_1..v_3, c]``. The start point
    is drawn from ``uniform(-1, 1)`` with the given seed.
    """
    dim = 3 * ANN_WIDTH + 1
    start = np.random.default_rng(seed).uniform(-1.0, 1.0, dim)
    params = {"seed": int(seed)} if seed != 0 else {}
    return _builtin("ann_softplus", ANN_SOFTPLUS, [], dim, lower_bound=0.0,
                    start=start, params=params)


def mexican_hat(scale: float = MEXICAN_HAT_SCALE) -> Problem:
    """Curry-type potential, zero outside the unit disc.

    Inside the disc, in polar coordinates ``(r, theta)`` with ``s = 1 - r^2``::

        F = scale * exp(-1/s) * (1 - 4 r^4 / (4 r^4 + s^4) * sin(theta - 1/s))

    All derivatives vanish on the unit circle, so ``F`` is C-infinity. The
    flow slides into a valley that winds around the disc infinitely often
    as ``r -> 1``.
    """
    scale = check_positive(float(scale), "scale")
    params = {"scale": scale} if scale != MEXICAN_HAT_SCALE else {}
    return _builtin("mexican_hat", MEXICAN_HAT, [scale], 2, lower_bound=0.0,
                    start=np.array([0.5, 0.0]), params=params)


_FACTORIES = {
    "quadratic": quadratic,
    "rosenbrock": rosenbrock,
    "himmelblau": himmelblau,
    "ann_softplus": ann_softplus,
    "mexican_hat": mexican_hat,
}
PROBLEM_NAMES = tuple(_FACTORIES)

_VECTOR_PARAMS = {"b", "diag"}
_MATRIX_PARAMS = {"A"}
_INT_PARAMS = {"d", "seed"}
_FLOAT_PARAMS = {"scale"}


def make_problem(name: str, **params) -> Problem:
    """Build a suite problem by name; unknown names or parameters raise :class:`ArgumentError`."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ArgumentError(
            f"unknown problem {name!r}; choose from {', '.join(PROBLEM_NAMES)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ArgumentError(f"bad parameters for {name}: {exc}") from None


_KEY_RE = re.compile(r"(?:^|[,;])([A-Za-z_]\w*)=")


def parse_keyvals(text: str) -> dict[str, str]:
    """Split ``"A=1,0;0,4,b=1,2"`` into ``{"A": "1,0;0,4", "b": "1,2"}``."""
    matches = list(_KEY_RE.finditer(text))
    if text and (not matches or matches[0].start() != 0):
        raise ArgumentError(f"expected key=value pairs in {text!r}")
    out = {}
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        key = m.group(1)
        if key in out:
            raise ArgumentError(f"duplicate key {key!r} in {text!r}")
        out[key] = text[m.end():end]
    return out


def parse_floats(text: str, what: str = "value") -> list[float]:
    """Parse comma-separated floats, reporting the 1-based position of the first bad entry."""
    values = []
    for pos, item in enumerate(text.split(","), start=1):
        try:
            values.append(float(item))
        except ValueError:
            raise ArgumentError(
                f"malformed number {item.strip()!r} at position {pos} of {what}") from None
    return values


def parse_problem_spec(spec: str) -> Problem:
    """``"name"`` or ``"name:key=value,..."``; matrices use ``;`` between rows."""
    name, _, rest = spec.partition(":")
    params = {}
    for key, raw in parse_keyvals(rest).items():
        if key in _MATRIX_PARAMS:
            params[key] = [parse_floats(row, key) for row in raw.split(";")]
        elif key in _VECTOR_PARAMS:
            params[key] = parse_floats(raw, key)
        elif key in _INT_PARAMS:
            try:
                params[key] = int(raw)
            except ValueError:
                raise ArgumentError(f"{key} must be an integer, got {raw!r}") from None
        elif key in _FLOAT_PARAMS:
            (params[key],) = parse_floats(raw, key)
        else:
            raise ArgumentError(f"unknown parameter {key!r} for problem {name!r}")
    return make_problem(name.strip(), **params)


def parse_region_spec(spec: str, dim: int) -> ConvexRegion:
    """Parse ``box:lo=..,hi=..``, ``box:LO,HI`` (scalar bounds), ``ball:center=..,radius=R``."""
    kind, _, rest = spec.partition(":")
    if kind == "box":
        if "=" not in rest:
            bounds = parse_floats(rest, "box")
            if len(bounds) != 2:
                raise ArgumentError("scalar box spec needs exactly two numbers LO,HI")
            return ConvexRegion.box(np.full(dim, bounds[0]), np.full(dim, bounds[1]))
        kv = parse_keyvals(rest)
        unknown = set(kv) - {"lo", "hi"}
        if unknown or len(kv) != 2:
            raise ArgumentError(f"box spec needs lo= and hi=, got {sorted(kv)}")
        return ConvexRegion.box(_broadcast(parse_floats(kv["lo"], "lo"), dim),
                                _broadcast(parse_floats(kv["hi"], "hi"), dim))
    if kind == "ball":
        kv = parse_keyvals(rest)
        unknown = set(kv) - {"center", "radius"}
        if unknown or "radius" not in kv:
            raise ArgumentError(f"ball spec needs radius= and optional center=, got {sorted(kv)}")
        center = _broadcast(parse_floats(kv["center"], "center"), dim) if "center" in kv else np.zeros(dim)
        radius = parse_floats(kv["radius"], "radius")
        if len(radius) != 1:
            raise ArgumentError("radius must be a single number")
        return ConvexRegion.ball(center, radius[0])
    raise ArgumentError(f"unknown region kind {kind!r}; expected box or ball")


def _broadcast(values: list[float], dim: int) -> np.ndarray:
    if len(values) == 1:
        return np.full(dim, values[0])
    if len(values) != dim:
        raise ArgumentError(f"expected {dim} coordinates, got {len(values)}")
    return np.asarray(values)
