"""Finite-horizon convergence diagnostics and certificates for gradient flow
and gradient descent on C^1 objectives."""

__version__ = "0.1.0"

from .certify import Certificate, certify_descent, certify_flow, emit_report, parse_report
from .descent import DescentLog, DescentVerdict, StepMargin, detect_descent_convergence, run, step_margins
from .estimators import GradientDescent, GradientFlow, HolderEstimator
from .exceptions import ArgumentError, InsufficientDataError, NumericOverflowError, StiffnessError
from .flow import FlowTrajectory, FlowVerdict, detect_flow_convergence, energy_residual, integrate
from .holder import HolderEstimate, estimate_alpha, estimate_c
from .objective import (ConvexRegion, Problem, check_gradient, contains, make_problem,
                        parse_problem_spec, parse_region_spec)
from .schedule import Schedule, ScheduleVerdict, classify, gamma, partial_sum, parse_schedule_spec

__all__ = [
    "ArgumentError", "Certificate", "ConvexRegion", "DescentLog", "DescentVerdict",
    "FlowTrajectory", "FlowVerdict", "GradientDescent", "GradientFlow", "HolderEstimate",
    "HolderEstimator", "InsufficientDataError", "NumericOverflowError", "Problem", "Schedule",
    "ScheduleVerdict", "StepMargin", "StiffnessError", "certify_descent", "certify_flow",
    "check_gradient", "classify", "contains", "detect_descent_convergence",
    "detect_flow_convergence", "emit_report", "energy_residual", "estimate_alpha", "estimate_c",
    "gamma", "integrate", "make_problem", "parse_problem_spec", "parse_region_spec",
    "parse_report", "parse_schedule_spec", "partial_sum", "run", "step_margins",
]
