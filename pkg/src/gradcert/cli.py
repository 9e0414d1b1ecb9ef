"""Command-line frontend.

Exit codes: 0 success, 1 a hypothesis was violated (outputs still written),
2 usage error, 3 numeric or filesystem failure.

Options may also come from ``--config FILE``: flat ``key=value`` lines whose
keys are the long flag names without dashes (``out-trace`` or
``out_trace``). Blank lines and ``#`` comments are ignored. Flags given on
the command line win over the file.

All randomness derives from ``--seed``. A component with stream id ``k``
uses ``SeedSequence([seed, k])``; the Hölder sampler is stream 1.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import shlex
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import __version__, certify, descent, flow, holder, schedule
from .exceptions import ArgumentError, InsufficientDataError, NumericOverflowError, StiffnessError
from .objective import (PROBLEM_NAMES, make_problem, parse_floats,
                        parse_problem_spec, parse_region_spec)

EXIT_OK, EXIT_VIOLATED, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2, 3
COMMANDS = ("problems", "flow", "descent", "holder", "schedule", "certify-flow", "certify-descent")
HOLDER_STREAM = 1

REQUIRED = {
    "problems": (),
    "flow": ("problem",),
    "certify-flow": ("problem",),
    "descent": ("problem", "schedule"),
    "certify-descent": ("problem", "schedule"),
    "holder": ("problem", "region"),
    "schedule": ("schedule",),
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    problem: str | None = None
    x0: str | None = None
    schedule: str | None = None
    alpha: float | None = None
    region: str | None = None
    steps: int = 1000
    horizon: float = 10.0
    tol: float = 1e-9
    seed: int = 0
    eps: float | None = None
    window: float | None = None
    pairs: int = 10_000
    bins: int = 10
    norm: str = "l2"
    theorem: str | None = None
    out_trace: str | None = None
    out_cert: str | None = None
    format: str = "json"
    config_dir: str | None = None


_DEFAULTS = {f.name: f.default for f in fields(ExperimentConfig) if f.name != "command"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gradcert", description="Finite-horizon convergence certificates "
                     "for gradient flow and gradient descent.")
    parser.add_argument("--version", action="version", version=f"gradcert {__version__}")
    parser.add_argument("--batch", metavar="FILE",
                        help="run one invocation per line of FILE, concurrently")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    helps = {
        "problems": "list the built-in problems",
        "flow": "integrate the gradient flow and write its trace",
        "descent": "run gradient descent and write its log",
        "holder": "estimate the one-sided Hölder constant (and exponent)",
        "schedule": "classify a step-size schedule",
        "certify-flow": "print a flow certificate",
        "certify-descent": "print a descent certificate",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], argument_default=argparse.SUPPRESS)
        p.add_argument("--config", metavar="FILE", help="key=value defaults for any flag")
        p.add_argument("--problem", help="e.g. rosenbrock or quadratic:A=1,0;0,4,b=1,2")
        p.add_argument("--x0", help="comma-separated start point (default: the problem's)")
        p.add_argument("--schedule", help="const:0.1 | pow:a=1,beta=0.6 | list:@file")
        p.add_argument("--alpha", type=float, help="Hölder exponent in (0, 1]")
        p.add_argument("--region", help="box:lo=..,hi=.. | box:LO,HI | ball:center=..,radius=R")
        p.add_argument("--steps", type=int, help="descent steps (default 1000)")
        p.add_argument("--horizon", type=float, help="flow horizon T (default 10)")
        p.add_argument("--tol", type=float, help="integrator tolerance (default 1e-9)")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--eps", type=float, help="tail-window tolerance")
        p.add_argument("--window", type=float,
                       help="tail window: fraction of T for flow, step count for descent")
        p.add_argument("--pairs", type=int, help="Hölder sample size (default 10000)")
        p.add_argument("--bins", type=int, help="distance bins for exponent fitting (default 10)")
        p.add_argument("--norm", choices=sorted(holder.NORMS), help="norm for the Hölder ratio")
        p.add_argument("--theorem", choices=sorted(certify.THEOREMS))
        p.add_argument("--out-trace", dest="out_trace", metavar="PATH", help="CSV trace output")
        p.add_argument("--out-cert", dest="out_cert", metavar="PATH", help="certificate/report output")
        p.add_argument("--format", choices=("json", "text"), help="report format (default json)")
    return parser


def _read_config(path: str) -> tuple[list[str], str]:
    valid = set(_DEFAULTS) - {"config_dir"}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    tokens = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        if key not in valid:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        tokens += ["--" + key.replace("_", "-"), value.strip()]
    return tokens, os.path.dirname(os.path.abspath(path))


def parse_config(argv: list[str]) -> ExperimentConfig:
    """Validated configuration from command-line arguments (and an optional config file)."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError(f"a command is required: {', '.join(COMMANDS)}")
    values = vars(ns)
    if "config" in values:
        tokens, config_dir = _read_config(values["config"])
        from_file = vars(parser.parse_args([ns.command, *tokens]))
        values = {**from_file, **values, "config_dir": config_dir}
    values.pop("config", None)
    values.pop("batch", None)
    merged = {**_DEFAULTS, **{k: v for k, v in values.items() if k != "command"}}
    cfg = ExperimentConfig(command=ns.command, **merged)
    missing = [f"--{name}" for name in REQUIRED[cfg.command] if getattr(cfg, name) is None]
    if missing:
        raise UsageError(f"{cfg.command} requires {', '.join(missing)}")
    return cfg


# --------------------------------------------------------------------------
# Pipelines


def _sub_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def _start_point(cfg: ExperimentConfig, problem) -> np.ndarray:
    if cfg.x0 is None:
        return problem.start
    x0 = np.array(parse_floats(cfg.x0, "--x0"))
    if x0.shape[0] != problem.dim:
        raise ArgumentError(f"--x0 has {x0.shape[0]} coordinates, problem {problem.name} has {problem.dim}")
    return x0


def _write(path: str | None, payload: bytes) -> None:
    if path is None:
        return
    with open(path, "wb") as fh:
        fh.write(payload)


def _emit(cfg: ExperimentConfig, cert: certify.Certificate, stdout) -> None:
    report = certify.emit_report(cert, cfg.format)
    _write(cfg.out_cert, report)
    if cfg.command.startswith("certify-"):
        stdout.write(report.decode("utf-8"))


def _cmd_problems(cfg, stdout) -> int:
    stdout.write("name\tdim\tstart\tlower_bound\n")
    for name in PROBLEM_NAMES:
        p = make_problem(name)
        start = ",".join(f"{v:g}" for v in p.start)
        lb = "" if p.lower_bound is None else f"{p.lower_bound:g}"
        stdout.write(f"{name}\t{p.dim}\t{start}\t{lb}\n")
    return EXIT_OK


def _cmd_flow(cfg, stdout) -> int:
    problem = parse_problem_spec(cfg.problem)
    x0 = _start_point(cfg, problem)
    traj = flow.integrate(problem, x0, cfg.horizon, cfg.tol)
    eps = 1e-6 if cfg.eps is None else cfg.eps
    window = 0.25 if cfg.window is None else cfg.window
    verdict = flow.detect_flow_convergence(traj, window, eps)
    cert = certify.certify_flow(problem, traj, verdict, cfg.theorem or "GF-2.1")
    if cfg.out_trace:
        traj.to_csv(cfg.out_trace)
    _emit(cfg, cert, stdout)
    if cfg.command == "flow":
        stdout.write(f"{problem.name}: T={traj.horizon:g} steps={traj.step_count} "
                     f"F(x(T))={traj.f_values[-1]:.10g} "
                     f"energy_residual={flow.energy_residual(traj, problem):.3g}\n")
    return EXIT_VIOLATED if cert.violated else EXIT_OK


def _cmd_descent(cfg, stdout) -> int:
    problem = parse_problem_spec(cfg.problem)
    x0 = _start_point(cfg, problem)
    sched = schedule.parse_schedule_spec(cfg.schedule, cfg.config_dir)
    alpha = 1.0 if cfg.alpha is None else cfg.alpha
    region = parse_region_spec(cfg.region, problem.dim) if cfg.region else None

    log = descent.run(problem, x0, sched, cfg.steps, region)
    if region is None:
        region = descent.iterate_box(log)
        log = descent.run(problem, x0, sched, cfg.steps, region)

    h_seed = _sub_seed(cfg.seed, HOLDER_STREAM)
    est = holder.estimate_c(problem, region, alpha, cfg.pairs, h_seed, cfg.norm)
    margins = descent.step_margins(log, holder.SAFETY_FACTOR * est.c_hat, alpha)
    eps = 1e-8 if cfg.eps is None else cfg.eps
    window = descent.clip_window(log, 100 if cfg.window is None else int(cfg.window))
    verdict = descent.detect_descent_convergence(log, window, eps)
    cert = certify.certify_descent(problem, log, schedule.classify(sched, alpha), est, margins,
                                   verdict, cfg.theorem or "GD-3.1", seed=cfg.seed)
    if cfg.out_trace:
        log.to_csv(cfg.out_trace)
    _emit(cfg, cert, stdout)
    if cfg.command == "descent":
        stdout.write(f"{problem.name}: steps={log.n_steps} stopped={log.stopped_reason} "
                     f"F(x_N)={log.f_values[-1]:.10g} weighted_sum={log.total_weighted_sum:.10g}\n")
    return EXIT_VIOLATED if cert.violated else EXIT_OK


def _cmd_holder(cfg, stdout) -> int:
    import json

    problem = parse_problem_spec(cfg.problem)
    region = parse_region_spec(cfg.region, problem.dim)
    seed = _sub_seed(cfg.seed, HOLDER_STREAM)
    if cfg.alpha is None:
        est = holder.estimate_alpha(problem, region, cfg.pairs, cfg.bins, seed, cfg.norm)
    else:
        est = holder.estimate_c(problem, region, cfg.alpha, cfg.pairs, seed, cfg.norm)
    report = {"problem": problem.spec(), "region": region.spec(), "master_seed": cfg.seed,
              **est.as_dict(), "method": "sampled; c_hat is a lower bound on the true constant"}
    if cfg.format == "json":
        payload = json.dumps(report, indent=2) + "\n"
    else:
        payload = "".join(f"{k}: {v}\n" for k, v in report.items())
    _write(cfg.out_cert, payload.encode("utf-8"))
    stdout.write(payload)
    return EXIT_OK


def _cmd_schedule(cfg, stdout) -> int:
    import json

    sched = schedule.parse_schedule_spec(cfg.schedule, cfg.config_dir)
    alpha = 1.0 if cfg.alpha is None else cfg.alpha
    report = {"schedule": sched.spec(), **schedule.classify(sched, alpha).as_dict()}
    if cfg.format == "json":
        payload = json.dumps(report, indent=2) + "\n"
    else:
        payload = "".join(f"{k}: {v}\n" for k, v in report.items())
    _write(cfg.out_cert, payload.encode("utf-8"))
    stdout.write(payload)
    return EXIT_OK


_HANDLERS = {
    "problems": _cmd_problems,
    "flow": _cmd_flow,
    "certify-flow": _cmd_flow,
    "descent": _cmd_descent,
    "certify-descent": _cmd_descent,
    "holder": _cmd_holder,
    "schedule": _cmd_schedule,
}


def dispatch(cfg: ExperimentConfig, stdout=None, stderr=None) -> int:
    """Run the pipeline for ``cfg.command`` and return the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        return _HANDLERS[cfg.command](cfg, stdout)
    except ArgumentError as exc:
        stderr.write(f"gradcert: error: {exc}\n")
        return EXIT_USAGE
    except (StiffnessError, NumericOverflowError, InsufficientDataError) as exc:
        stderr.write(f"gradcert: numeric failure: {exc}\n")
        return EXIT_FAILURE
    except OSError as exc:
        stderr.write(f"gradcert: {exc}\n")
        return EXIT_FAILURE


def _run_batch(path: str, stderr) -> int:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        stderr.write(f"gradcert: cannot read batch file {path}: {exc.strerror}\n")
        return EXIT_FAILURE
    entries = [shlex.split(line) for line in lines]
    outputs = []
    for argv in entries:
        cfg = parse_config(argv)
        outputs += [p for p in (cfg.out_trace, cfg.out_cert) if p]
    if len(outputs) != len(set(map(os.path.abspath, outputs))):
        raise UsageError("batch entries must write to distinct output paths")
    with concurrent.futures.ProcessPoolExecutor() as pool:
        codes = list(pool.map(main, entries))
    return max(codes, default=EXIT_OK)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        if argv[:1] == ["--batch"] and len(argv) == 2:
            return _run_batch(argv[1], sys.stderr)
        cfg = parse_config(argv)
    except UsageError as exc:
        sys.stderr.write(f"usage: gradcert <command> [options]\ngradcert: error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"gradcert: {exc}\n")
        return EXIT_FAILURE
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
