"""Sampling estimates of the one-sided Hölder monotonicity constant.

For a pair ``(x, y)`` in a convex region the ratio

    <grad F(x) - grad F(y), x - y> / |x - y| ** (1 + alpha)

is bounded by ``c`` when the condition holds. Its maximum over sampled
pairs is a lower bound on the smallest valid ``c``; nothing here proves a
supremum.

Pairs are drawn in fixed-size blocks, block ``b`` from the generator seeded
with ``(seed, b)``, so requesting more pairs only appends to the sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_alpha, check_count
from .exceptions import ArgumentError, InsufficientDataError, NumericOverflowError
from .objective import ConvexRegion, Problem

__all__ = [
    "HolderEstimate",
    "estimate_c",
    "estimate_alpha",
    "estimate_c_from_pairs",
    "sample_pairs",
    "NORMS",
    "SAFETY_FACTOR",
]

NORMS = {"l1": 1, "l2": 2, "linf": np.inf}
SAFETY_FACTOR = 1.1
MIN_DISTANCE = 1e-12
BLOCK = 4096
# Shortest pair distance used by estimate_alpha, relative to the region diameter.
ALPHA_SPAN = 1e-4


@dataclass(frozen=True, eq=False)
class HolderEstimate:
    alpha: float
    c_hat: float
    n_pairs: int
    max_ratio_pair: tuple[np.ndarray, np.ndarray] | None
    seed: int | None
    norm: str = "l2"
    raw_slope: float | None = None
    n_skipped: int = 0

    def as_dict(self) -> dict:
        pair = None
        if self.max_ratio_pair is not None:
            pair = [[float(v) for v in p] for p in self.max_ratio_pair]
        return {
            "alpha": self.alpha,
            "c_hat": self.c_hat,
            "n_pairs": self.n_pairs,
            "seed": self.seed,
            "norm": self.norm,
            "raw_slope": self.raw_slope,
            "max_ratio_pair": pair,
        }


def _check_region(problem: Problem, region: ConvexRegion) -> None:
    if region.dim != problem.dim:
        raise ArgumentError(f"region has dimension {region.dim}, problem has {problem.dim}")
    if not region.has_volume:
        raise ArgumentError("region has zero volume; cannot sample pairs")


def _check_norm(norm: str):
    try:
        return NORMS[norm]
    except KeyError:
        raise ArgumentError(f"unknown norm {norm!r}; choose from {', '.join(NORMS)}") from None


def sample_pairs(region: ConvexRegion, n_pairs: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``n_pairs`` independent uniform pairs; a prefix of any longer request."""
    xs, ys = [], []
    for b in range(-(-n_pairs // BLOCK)):
        rng = np.random.default_rng([seed, b])
        xs.append(region.sample(rng, BLOCK))
        ys.append(region.sample(rng, BLOCK))
    return np.concatenate(xs)[:n_pairs], np.concatenate(ys)[:n_pairs]


def _grads(problem: Problem, points: np.ndarray) -> np.ndarray:
    out = np.array([problem.grad_fn(p) for p in points], dtype=np.float64).reshape(points.shape)
    if not np.all(np.isfinite(out)):
        raise NumericOverflowError(f"{problem.name}: non-finite gradient inside the region")
    return out


def _pairing(problem: Problem, X: np.ndarray, Y: np.ndarray, ord_):
    diff = X - Y
    with np.errstate(over="ignore", invalid="ignore"):
        num = np.einsum("ij,ij->i", _grads(problem, X) - _grads(problem, Y), diff)
        dist = np.linalg.norm(diff, ord=ord_, axis=1)
    return num, dist


def _max_ratio(X, Y, num, dist, alpha, seed, norm, raw_slope=None) -> HolderEstimate:
    # pairs too close to resolve, or too far apart to evaluate in float64, are skipped
    keep = (dist >= MIN_DISTANCE) & np.isfinite(dist) & np.isfinite(num)
    n_kept = int(keep.sum())
    c_hat, pair = 0.0, None
    if n_kept:
        idx = np.flatnonzero(keep)
        with np.errstate(over="ignore"):
            ratios = num[idx] / dist[idx] ** (1.0 + alpha)
        best = int(np.argmax(ratios))
        if ratios[best] > 0:
            c_hat = float(ratios[best])
            pair = (X[idx[best]].copy(), Y[idx[best]].copy())
    return HolderEstimate(alpha=alpha, c_hat=c_hat, n_pairs=n_kept, max_ratio_pair=pair,
                          seed=seed, norm=norm, raw_slope=raw_slope,
                          n_skipped=X.shape[0] - n_kept)


def estimate_c_from_pairs(problem: Problem, X, Y, alpha: float, norm: str = "l2") -> HolderEstimate:
    """Maximum ratio over the given pairs (rows of ``X`` and ``Y``), clamped below at 0."""
    alpha = check_alpha(alpha)
    ord_ = _check_norm(norm)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape != Y.shape or X.shape[1] != problem.dim:
        raise ArgumentError(f"pair arrays must both have shape (n, {problem.dim})")
    num, dist = _pairing(problem, X, Y, ord_)
    return _max_ratio(X, Y, num, dist, alpha, None, norm)


def estimate_c(problem: Problem, region: ConvexRegion, alpha: float, n_pairs: int = 10_000,
               seed: int = 0, norm: str = "l2") -> HolderEstimate:
    """Largest sampled ratio for pairs drawn uniformly from ``region``."""
    alpha = check_alpha(alpha)
    n_pairs = check_count(n_pairs, "n_pairs")
    ord_ = _check_norm(norm)
    _check_region(problem, region)
    X, Y = sample_pairs(region, n_pairs, seed)
    num, dist = _pairing(problem, X, Y, ord_)
    return _max_ratio(X, Y, num, dist, alpha, seed, norm)


def estimate_alpha(problem: Problem, region: ConvexRegion, n_pairs: int = 100_000,
                   n_bins: int = 10, seed: int = 0, norm: str = "l2") -> HolderEstimate:
    """Fit the exponent from how the largest pairing grows with pair distance.

    Uniform pairs are almost never close, so the second point is placed on
    the segment from ``x`` towards a uniform ``z`` at a log-uniform fraction
    ``t`` of the way; convexity keeps it in the region. Pairs are binned by
    distance into ``n_bins`` geometric bins over ``[1e-4 diam, diam]``. In
    each bin the largest pairing ``M_b`` is kept together with that pair's
    distance ``r_b``, and ``log M_b`` is regressed on ``log r_b`` over bins
    with ``M_b > 0``. The exponent is the slope minus one, clamped into
    ``(0, 1]``; the raw slope is reported too.
    """
    n_bins = check_count(n_bins, "n_bins", minimum=3)
    n_pairs = check_count(n_pairs, "n_pairs", minimum=10 * n_bins)
    ord_ = _check_norm(norm)
    _check_region(problem, region)

    X, Z = sample_pairs(region, n_pairs, seed)
    log_t = [np.random.default_rng([seed, b, 1]).uniform(np.log(ALPHA_SPAN), 0.0, BLOCK)
             for b in range(-(-n_pairs // BLOCK))]
    t = np.exp(np.concatenate(log_t)[:n_pairs])
    Y = X + t[:, None] * (Z - X)

    num, dist = _pairing(problem, X, Y, ord_)
    diam = region.diameter
    edges = np.geomspace(ALPHA_SPAN * diam, diam, n_bins + 1)
    which = np.searchsorted(edges, dist, side="right") - 1
    log_r, log_m = [], []
    for b in range(n_bins):
        members = np.flatnonzero((which == b) & (dist >= MIN_DISTANCE))
        if members.size == 0:
            continue
        top = members[np.argmax(num[members])]
        if num[top] > 0:
            log_r.append(np.log(dist[top]))
            log_m.append(np.log(num[top]))
    if len(log_r) < 3:
        raise InsufficientDataError(
            f"only {len(log_r)} distance bin(s) have a positive maximum pairing; need 3")
    slope = float(np.polyfit(log_r, log_m, 1)[0])
    alpha = min(1.0, max(slope - 1.0, np.finfo(float).tiny))
    return _max_ratio(X, Y, num, dist, alpha, seed, norm, raw_slope=slope)
