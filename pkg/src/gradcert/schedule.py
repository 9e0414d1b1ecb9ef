"""Step-size sequences and their classification against the step-size hypotheses.

Three questions are asked of a schedule ``gamma_n``:

* does ``gamma_n`` tend to zero,
* is ``sum_n 1_(0,1)(alpha) * gamma_n ** ((1 + alpha) / (1 - alpha))`` finite,
* does ``sum_n gamma_n`` diverge.

Constant and power-law schedules are decided by the p-series test. The
comparison ``beta * (1 + alpha) / (1 - alpha) > 1`` is done in exact
rational arithmetic on the decimal forms of ``alpha`` and ``beta`` so that a
borderline case such as ``beta = 0.6, alpha = 0.25`` (harmonic series) is
not flipped by rounding.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction

from ._validation import check_alpha, check_count, check_positive
from .exceptions import ArgumentError

__all__ = ["Schedule", "ScheduleVerdict", "gamma", "classify", "partial_sum", "parse_schedule_spec"]

YES, NO, VACUOUS, UNKNOWN = "yes", "no", "vacuous", "unknown"
KINDS = ("constant", "power_law", "explicit_list")


@dataclass(frozen=True)
class Schedule:
    """``constant``: ``gamma_n = a``; ``power_law``: ``gamma_n = a (n + 1) ** -beta``;
    ``explicit_list``: ``gamma_n = values[n]``."""

    kind: str
    a: float = 1.0
    beta: float = 0.0
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "explicit_list":
            if not self.values:
                raise ArgumentError("explicit_list needs at least one value")
            for i, v in enumerate(self.values):
                if not (isinstance(v, float) and math.isfinite(v) and v > 0):
                    raise ArgumentError(f"step size at index {i} must be finite and > 0, got {v!r}")
        else:
            check_positive(self.a, "a")
            check_positive(self.beta, "beta", allow_zero=True)

    @classmethod
    def constant(cls, a: float) -> "Schedule":
        return cls("constant", a=float(check_positive(a, "a")))

    @classmethod
    def power_law(cls, a: float, beta: float) -> "Schedule":
        return cls("power_law", a=float(check_positive(a, "a")),
                   beta=float(check_positive(beta, "beta", allow_zero=True)))

    @classmethod
    def explicit_list(cls, values) -> "Schedule":
        return cls("explicit_list", values=tuple(float(v) for v in values))

    @property
    def length(self) -> int | None:
        """Number of defined terms, ``None`` for infinite schedules."""
        return len(self.values) if self.kind == "explicit_list" else None

    def __call__(self, n: int) -> float:
        return gamma(self, n)

    def spec(self) -> str:
        if self.kind == "constant":
            return f"const:{self.a!r}"
        if self.kind == "power_law":
            return f"pow:a={self.a!r},beta={self.beta!r}"
        return "list:" + ",".join(repr(v) for v in self.values)


@dataclass(frozen=True)
class ScheduleVerdict:
    limsup_zero: str
    power_sum_finite: str
    gamma_sum_diverges: str
    alpha_used: float
    # explicit lists only: largest step in the last quarter of the list
    tail_max: float | None = None

    def as_dict(self) -> dict:
        return {
            "limsup_zero": self.limsup_zero,
            "power_sum_finite": self.power_sum_finite,
            "gamma_sum_diverges": self.gamma_sum_diverges,
            "alpha_used": self.alpha_used,
            "tail_max": self.tail_max,
        }


def gamma(schedule: Schedule, n: int) -> float:
    n = check_count(n, "n", minimum=0)
    if schedule.kind == "constant":
        return schedule.a
    if schedule.kind == "power_law":
        return schedule.a * float(n + 1) ** -schedule.beta
    if n >= len(schedule.values):
        raise ArgumentError(f"step index {n} beyond explicit list of length {len(schedule.values)}")
    return schedule.values[n]


def partial_sum(schedule: Schedule, n: int) -> float:
    """``sum_{l=0}^{n} gamma_l`` with exactly rounded accumulation."""
    n = check_count(n, "n", minimum=0)
    return math.fsum(gamma(schedule, k) for k in range(n + 1))


def _exact(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def classify(schedule: Schedule, alpha: float) -> ScheduleVerdict:
    alpha = check_alpha(alpha)
    vacuous = alpha == 1.0

    if schedule.kind == "explicit_list":
        vals = schedule.values
        tail = vals[len(vals) - max(1, len(vals) // 4):]
        return ScheduleVerdict(
            limsup_zero=UNKNOWN,
            power_sum_finite=VACUOUS if vacuous else UNKNOWN,
            gamma_sum_diverges=UNKNOWN,
            alpha_used=alpha,
            tail_max=max(tail),
        )

    if schedule.kind == "constant":
        return ScheduleVerdict(
            limsup_zero=NO,
            power_sum_finite=VACUOUS if vacuous else NO,
            gamma_sum_diverges=YES,
            alpha_used=alpha,
        )

    beta = _exact(schedule.beta)
    if vacuous:
        power = VACUOUS
    else:
        a = _exact(alpha)
        # beta * (1 + a) / (1 - a) > 1 with 1 - a > 0
        power = YES if beta * (1 + a) > 1 - a else NO
    return ScheduleVerdict(
        limsup_zero=YES if beta > 0 else NO,
        power_sum_finite=power,
        gamma_sum_diverges=YES if beta <= 1 else NO,
        alpha_used=alpha,
    )


def parse_schedule_spec(spec: str, base_dir: str | os.PathLike | None = None) -> Schedule:
    """``const:0.1``, ``pow:a=1,beta=0.6``, ``list:@steps.csv`` or ``list:0.1,0.05``.

    A list file holds one positive decimal per line; blank lines are skipped.
    Relative file paths resolve against ``base_dir`` when given.
    """
    from .objective import parse_floats, parse_keyvals

    kind, sep, rest = spec.partition(":")
    kind = kind.strip()
    if not sep:
        raise ArgumentError(f"schedule spec {spec!r} must look like kind:params")
    if kind == "const":
        (a,) = _single(parse_floats(rest, "const"), "const")
        return Schedule.constant(a)
    if kind == "pow":
        kv = parse_keyvals(rest)
        unknown = set(kv) - {"a", "beta"}
        if unknown:
            raise ArgumentError(f"unknown pow parameter(s): {', '.join(sorted(unknown))}")
        if "beta" not in kv:
            raise ArgumentError("pow schedule needs beta=")
        a = _single(parse_floats(kv["a"], "a"), "a")[0] if "a" in kv else 1.0
        beta = _single(parse_floats(kv["beta"], "beta"), "beta")[0]
        return Schedule.power_law(a, beta)
    if kind == "list":
        if rest.startswith("@"):
            path = rest[1:]
            if base_dir is not None and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            try:
                with open(path, encoding="utf-8") as fh:
                    lines = fh.read().splitlines()
            except OSError as exc:
                raise OSError(f"cannot read step list {path}: {exc.strerror}") from exc
            values = []
            for lineno, line in enumerate(lines, start=1):
                if line.strip():
                    values.extend(parse_floats(line.strip(), f"line {lineno} of {path}"))
        else:
            values = parse_floats(rest, "list")
        return Schedule.explicit_list(values)
    raise ArgumentError(f"unknown schedule kind {kind!r}; expected const, pow or list")


def _single(values: list[float], what: str) -> list[float]:
    if len(values) != 1:
        raise ArgumentError(f"{what} takes a single number, got {len(values)}")
    return values
