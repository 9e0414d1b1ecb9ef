"""Finite-horizon certificates for the gradient-flow and gradient-descent theorems.

A certificate lists every hypothesis of one theorem with a verdict and the
evidence behind it, then every conclusion with what the run showed. The
verdict vocabulary is deliberately four-valued:

``verified``
    decided exactly (a declared lower bound, a series test, an analytic
    constant, or a gradient check that has no time horizon).
``observed-on-horizon``
    held on the finite run or sample; says nothing about ``t -> infinity``.
``violated``
    failed on the run, or decided false.
``unknown``
    no finite test decides it.

A conclusion is only ever ``verified`` when it held on the run and every
hypothesis it depends on is ``verified`` or ``observed-on-horizon``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .descent import OVERFLOW, DescentLog, DescentVerdict, StepMargin, margin_ok
from .exceptions import ArgumentError, NumericOverflowError
from .flow import FlowTrajectory, FlowVerdict
from .holder import SAFETY_FACTOR, HolderEstimate
from .objective import Problem, check_gradient
from .schedule import NO, UNKNOWN, VACUOUS, YES, ScheduleVerdict

__all__ = ["Clause", "Certificate", "certify_flow", "certify_descent", "emit_report",
           "parse_report", "THEOREMS", "SCHEMA"]

SCHEMA = "gradcert/1"
VERIFIED, OBSERVED, VIOLATED = "verified", "observed-on-horizon", "violated"
ADMISSIBLE = (VERIFIED, OBSERVED)
GRADIENT_CHECK_TOL = 1e-5
GRADIENT_CHECK_POINTS = 20

HYPOTHESES = {
    "C1": "F is continuously differentiable (analytic gradient matches central differences)",
    "inf_F": "F is bounded below along the trajectory",
    "bounded": "the trajectory stays bounded",
    "holder_on_C": "one-sided Hölder condition <grad F(x) - grad F(y), x - y> <= c |x - y|^(1+alpha) on a convex C containing every iterate",
    "limsup_gamma": "step sizes tend to zero",
    "power_sum": "sum of 1_(0,1)(alpha) gamma_n^((1+alpha)/(1-alpha)) is finite",
    "gamma_sum_diverges": "sum of gamma_n diverges (premise of conclusion iii)",
}

CONCLUSIONS = {
    ("GF", "i"): "F(x(t)) converges as t -> infinity",
    ("GF-2.1", "ii"): "integral of |grad F(x(s))|^2 over [0, infinity) is finite",
    ("GF-2.2", "ii"): "limsup of |grad F(x(t))| is 0",
    ("GD", "i"): "F(x_n) converges",
    ("GD", "ii"): "sum of gamma_n |grad F(x_n)|^2 is finite",
    ("GD", "iii"): "limsup of |grad F(x_n)| is 0",
}

THEOREMS = {
    "GF-2.1": (("C1", "inf_F"), ("i", "ii")),
    "GF-2.2": (("C1", "bounded"), ("i", "ii")),
    "GD-3.1": (("C1", "holder_on_C", "limsup_gamma", "power_sum", "inf_F"), ("i", "ii")),
    "GD-3.2": (("C1", "holder_on_C", "limsup_gamma", "power_sum", "inf_F", "gamma_sum_diverges"),
               ("i", "ii", "iii")),
}


def conclusion_description(theorem: str, cid: str) -> str:
    for key in ((theorem, cid), (theorem[:2], cid)):
        if key in CONCLUSIONS:
            return CONCLUSIONS[key]
    raise KeyError((theorem, cid))


@dataclass
class Clause:
    id: str
    verdict: str
    evidence: dict = field(default_factory=dict)
    description: str = ""


@dataclass
class Certificate:
    theorem: str
    problem: str
    run: dict
    hypotheses: list[Clause]
    conclusions: list[Clause]

    @property
    def applicable(self) -> bool:
        return all(h.verdict in ADMISSIBLE for h in self.hypotheses
                   if h.id != "gamma_sum_diverges")

    @property
    def violated(self) -> bool:
        return any(h.verdict == VIOLATED for h in self.hypotheses)

    def hypothesis(self, cid: str) -> Clause:
        return next(h for h in self.hypotheses if h.id == cid)

    def conclusion(self, cid: str) -> Clause:
        return next(c for c in self.conclusions if c.id == cid)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "theorem": self.theorem,
            "problem": self.problem,
            "run": _plain(self.run),
            "hypotheses": [{"id": h.id, "description": h.description, "verdict": h.verdict,
                            "evidence": _plain(h.evidence)} for h in self.hypotheses],
            "conclusions": [{"id": c.id, "verdict": c.verdict, "evidence": _plain(c.evidence)}
                            for c in self.conclusions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Certificate":
        if data.get("schema") != SCHEMA:
            raise ArgumentError(f"unsupported certificate schema {data.get('schema')!r}")
        theorem = data["theorem"]
        return cls(
            theorem=theorem,
            problem=data["problem"],
            run=_decode(data["run"]),
            hypotheses=[Clause(h["id"], h["verdict"], _decode(h["evidence"]), h["description"])
                        for h in data["hypotheses"]],
            conclusions=[Clause(c["id"], c["verdict"], _decode(c["evidence"]),
                                conclusion_description(theorem, c["id"]))
                         for c in data["conclusions"]],
        )


# --------------------------------------------------------------------------
# JSON plumbing: plain types only; non-finite floats travel as strings.

_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


def _decode(value):
    if isinstance(value, dict):
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    if isinstance(value, str) and value in _NONFINITE:
        return _NONFINITE[value]
    return value


# --------------------------------------------------------------------------
# Shared clause builders


def _c1_clause(problem: Problem, points: np.ndarray) -> Clause:
    # probe step scales with |x| so far-out iterates (divergent runs) stay resolvable
    idx = np.unique(np.linspace(0, len(points) - 1, min(GRADIENT_CHECK_POINTS, len(points))).astype(int))
    errors, skipped = [], 0
    for i in idx:
        h = 1e-5 * max(1.0, float(np.abs(points[i]).max()))
        try:
            errors.append(check_gradient(problem, points[i], h=h))
        except NumericOverflowError:
            skipped += 1
    worst = max(errors, default=0.0)
    verdict = VERIFIED if errors and worst <= GRADIENT_CHECK_TOL else (VIOLATED if errors else "unknown")
    return Clause("C1", verdict, {"max_relative_error": worst, "points_checked": len(errors),
                                  "points_skipped": skipped, "tolerance": GRADIENT_CHECK_TOL},
                  HYPOTHESES["C1"])


def _inf_clause(problem: Problem, f_values: np.ndarray) -> Clause:
    if problem.lower_bound is not None:
        return Clause("inf_F", VERIFIED, {"lower_bound": problem.lower_bound, "source": "declared"},
                      HYPOTHESES["inf_F"])
    return Clause("inf_F", OBSERVED, {"min_observed_F": float(np.min(f_values)), "source": "observed"},
                  HYPOTHESES["inf_F"])


def _conclusion(theorem: str, cid: str, passed: bool, admissible: bool, evidence: dict) -> Clause:
    if not passed:
        verdict = VIOLATED
    elif admissible:
        verdict = VERIFIED
    else:
        verdict = OBSERVED
    return Clause(cid, verdict, {"passed": bool(passed), **evidence},
                  conclusion_description(theorem, cid))


def _finish(theorem: str, problem: Problem, run: dict, hyps: list[Clause],
            concl: list[Clause]) -> Certificate:
    cert = Certificate(theorem, problem.spec(), _plain(run), hyps, concl)
    cert.run["applicable"] = cert.applicable
    for c in cert.hypotheses + cert.conclusions:
        c.evidence = _plain(c.evidence)
    _check_structure(cert)
    return cert


def _check_structure(cert: Certificate) -> None:
    hyp_ids, concl_ids = THEOREMS[cert.theorem]
    assert tuple(h.id for h in cert.hypotheses) == hyp_ids
    assert tuple(c.id for c in cert.conclusions) == concl_ids
    if any(c.verdict == VERIFIED for c in cert.conclusions):
        assert cert.applicable


# --------------------------------------------------------------------------
# Gradient flow


def certify_flow(problem: Problem, traj: FlowTrajectory, verdict: FlowVerdict,
                 theorem: str = "GF-2.1") -> Certificate:
    """Certificate for the flow theorem ``GF-2.1`` (lower bound) or ``GF-2.2`` (bounded orbit)."""
    if theorem not in ("GF-2.1", "GF-2.2"):
        raise ArgumentError(f"flow certificates cover GF-2.1 and GF-2.2, not {theorem!r}")
    if traj.problem_name != problem.name or traj.dim != problem.dim:
        raise ArgumentError("trajectory was not produced by this problem")
    if problem.eval(traj.x0) != traj.f_values[0]:
        raise ArgumentError("trajectory start value does not match the problem")
    if not (0.0 <= verdict.window_start <= traj.horizon):
        raise ArgumentError("convergence verdict does not belong to this trajectory")

    f0 = float(traj.f_values[0])
    hyps = [_c1_clause(problem, traj.states)]
    if theorem == "GF-2.1":
        hyps.append(_inf_clause(problem, traj.f_values))
    else:
        hyps.append(Clause("bounded", OBSERVED, {"max_norm": verdict.x_bounded},
                           HYPOTHESES["bounded"]))
    admissible = all(h.verdict in ADMISSIBLE for h in hyps)

    concl = [_conclusion(theorem, "i", verdict.f_converged, admissible, {
        "tail_f_spread": verdict.f_spread, "eps": verdict.eps,
        "threshold": verdict.eps * (1.0 + abs(f0)), "window_start": verdict.window_start})]
    if theorem == "GF-2.1":
        inf = problem.lower_bound if problem.lower_bound is not None else float(traj.f_values.min())
        budget = f0 - inf
        slack = 100.0 * traj.tol * (1.0 + abs(f0))
        e_final = float(traj.energy_integral[-1])
        concl.append(_conclusion(theorem, "ii", e_final <= budget + slack, admissible, {
            "energy_integral_T": e_final, "F0_minus_inf": budget, "tolerance": slack}))
    else:
        concl.append(_conclusion(theorem, "ii", verdict.grad_vanishes, admissible, {
            "tail_grad_max": verdict.grad_tail_max, "eps": verdict.eps,
            "window_start": verdict.window_start}))

    notes = []
    if not verdict.x_settled:
        notes.append(
            f"state did not settle on the tail window (diameter {verdict.tail_diameter:.3g} > "
            f"eps {verdict.eps:g}); neither flow theorem claims that x(t) converges")
    run = {
        "kind": "flow",
        "problem": problem.spec(),
        "x0": traj.x0,
        "horizon": traj.horizon,
        "tol": traj.tol,
        "steps": traj.step_count,
        "rejected_steps": traj.reject_count,
        "F0": f0,
        "F_T": float(traj.f_values[-1]),
        "x_settled": verdict.x_settled,
        "tail_diameter": verdict.tail_diameter,
        "notes": notes,
    }
    return _finish(theorem, problem, run, hyps, concl)


# --------------------------------------------------------------------------
# Gradient descent

_SCHEDULE_VERDICT = {YES: VERIFIED, VACUOUS: VERIFIED, NO: VIOLATED, UNKNOWN: "unknown"}


def _holder_clause(problem: Problem, log: DescentLog, holder: HolderEstimate) -> Clause:
    evidence = {**holder.as_dict(), "safety_factor": SAFETY_FACTOR}
    outside = 0
    if log.in_region is not None:
        outside = int((~log.in_region).sum())
        evidence["iterates_in_C_fraction"] = float(log.in_region.mean())
        evidence["region"] = log.region.spec() if log.region is not None else None
    else:
        evidence["region"] = None
    evidence["segments_in_C"] = "endpoint containment implies segment containment for convex C"

    bound = problem.holder_bound
    if outside:
        verdict = VIOLATED
        evidence["iterates_outside_C"] = outside
    elif bound is not None and bound[0] == holder.alpha:
        verdict = VERIFIED
        evidence["source"] = "analytic"
        evidence["c_analytic"] = bound[1]
    else:
        verdict = OBSERVED
        evidence["source"] = "empirical, from below"
    return Clause("holder_on_C", verdict, evidence, HYPOTHESES["holder_on_C"])


def certify_descent(problem: Problem, log: DescentLog, schedule_verdict: ScheduleVerdict,
                    holder: HolderEstimate, margins: list[StepMargin], verdict: DescentVerdict,
                    theorem: str = "GD-3.1", tol_check: float = 1e-12,
                    seed: int | None = None) -> Certificate:
    """Certificate for ``GD-3.1`` or ``GD-3.2`` from one coherent descent run.

    ``margins`` should be computed with ``c = SAFETY_FACTOR * holder.c_hat``;
    the audit counts in-region steps whose slack is below ``-tol_check (1 + |lhs|)``.
    """
    if theorem not in ("GD-3.1", "GD-3.2"):
        raise ArgumentError(f"descent certificates cover GD-3.1 and GD-3.2, not {theorem!r}")
    if schedule_verdict.alpha_used != holder.alpha:
        raise ArgumentError(
            f"alpha mismatch: schedule classified at {schedule_verdict.alpha_used}, "
            f"Hölder estimate at {holder.alpha}")
    if log.problem_name != problem.name or log.dim != problem.dim:
        raise ArgumentError("descent log was not produced by this problem")
    if len(margins) != log.n_steps:
        raise ArgumentError(f"expected {log.n_steps} step margins, got {len(margins)}")

    sv = schedule_verdict
    hyps = [
        _c1_clause(problem, log.iterates),
        _holder_clause(problem, log, holder),
        Clause("limsup_gamma", _SCHEDULE_VERDICT[sv.limsup_zero],
               {"classification": sv.limsup_zero, "tail_max": sv.tail_max}, HYPOTHESES["limsup_gamma"]),
        Clause("power_sum", _SCHEDULE_VERDICT[sv.power_sum_finite],
               {"classification": sv.power_sum_finite, "alpha": sv.alpha_used}, HYPOTHESES["power_sum"]),
        _inf_clause(problem, log.f_values),
    ]
    if theorem == "GD-3.2":
        hyps.append(Clause("gamma_sum_diverges", _SCHEDULE_VERDICT[sv.gamma_sum_diverges],
                           {"classification": sv.gamma_sum_diverges}, HYPOTHESES["gamma_sum_diverges"]))
    admissible = all(h.verdict in ADMISSIBLE for h in hyps[:5])

    empty = log.n_steps == 0
    f0 = float(log.f_values[0])
    concl = [
        _conclusion(theorem, "i", verdict.f_cauchy, admissible, {} if empty else {
            "window": verdict.window, "eps": verdict.eps,
            "tail_f_spread_threshold": verdict.eps * (1.0 + abs(f0)),
            "F_final": float(log.f_values[-1])}),
        _conclusion(theorem, "ii", verdict.weighted_sum_plateau, admissible, {} if empty else {
            "weighted_sum_final": log.total_weighted_sum,
            "increase_over_window": verdict.weighted_sum_increase,
            "window": verdict.window, "eps": verdict.eps}),
    ]
    if theorem == "GD-3.2":
        if hyps[5].verdict in ADMISSIBLE:
            concl.append(_conclusion(theorem, "iii", verdict.min_grad_tail <= verdict.eps, admissible,
                                     {} if empty else {"min_grad_tail": verdict.min_grad_tail,
                                                       "eps": verdict.eps}))
        else:
            concl.append(Clause("iii", "unknown",
                                {"reason": "premise sum gamma_n = infinity not established",
                                 "min_grad_tail": verdict.min_grad_tail},
                                conclusion_description(theorem, "iii")))

    inside = [m for m in margins if m.inside]
    bad = [m for m in inside if not margin_ok(m, tol_check)]
    audit = {
        "c_used": SAFETY_FACTOR * holder.c_hat,
        "alpha": holder.alpha,
        "tol_check": tol_check,
        "steps_total": len(margins),
        "steps_inside_C": len(inside),
        "negative_slack_steps": len(bad),
        "worst_slack": min((m.slack for m in inside), default=None),
    }
    notes = []
    if log.stopped_reason == OVERFLOW:
        notes.append(f"iterates overflowed after {log.n_steps} steps")
    run = {
        "kind": "descent",
        "problem": problem.spec(),
        "x0": log.iterates[0],
        "schedule": log.schedule.spec(),
        "schedule_classification": sv.as_dict(),
        "steps": log.n_steps,
        "stopped_reason": log.stopped_reason,
        "seed": seed,
        "descent_audit": audit,
        "notes": notes,
    }
    return _finish(theorem, problem, run, hyps, concl)


# --------------------------------------------------------------------------
# Reports


def emit_report(cert: Certificate, format: str = "json") -> bytes:
    if format == "json":
        return (json.dumps(cert.to_dict(), indent=2, allow_nan=False) + "\n").encode("utf-8")
    if format == "text":
        return _text(cert).encode("utf-8")
    raise ArgumentError(f"unknown report format {format!r}; expected json or text")


def parse_report(data: bytes | str) -> Certificate:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return Certificate.from_dict(json.loads(data))


def _fmt_evidence(evidence: dict) -> str:
    parts = []
    for k, v in evidence.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        elif isinstance(v, dict):
            continue
        parts.append(f"{k}={v}")
    return ", ".join(parts)


def _text(cert: Certificate) -> str:
    lines = [f"certificate {cert.theorem} for {cert.problem}  [{SCHEMA}]"]
    if not cert.applicable:
        lines.append("!! theorem not applicable: not every hypothesis holds; "
                     "conclusions below are observations only")
    lines.append("")
    lines.append("hypotheses")
    width = max(len(h.id) for h in cert.hypotheses)
    for h in cert.hypotheses:
        flag = "  HYPOTHESIS VIOLATED" if h.verdict == VIOLATED else ""
        lines.append(f"  {h.id:<{width}}  {h.verdict:<19}  {h.description}{flag}")
        if h.evidence:
            lines.append(f"  {'':<{width}}  {'':<19}  {_fmt_evidence(h.evidence)}")
    lines.append("")
    lines.append("conclusions")
    for c in cert.conclusions:
        lines.append(f"  {c.id:<{width}}  {c.verdict:<19}  {c.description}")
        if c.evidence:
            lines.append(f"  {'':<{width}}  {'':<19}  {_fmt_evidence(c.evidence)}")
    lines.append("")
    lines.append("run")
    for k, v in cert.run.items():
        if k == "notes":
            continue
        if isinstance(v, dict):
            v = _fmt_evidence(v)
        lines.append(f"  {k}: {v}")
    for note in cert.run.get("notes", []):
        lines.append(f"  note: {note}")
    return "\n".join(lines) + "\n"
