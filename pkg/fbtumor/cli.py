"""
FBTumor - Command Line Interface

Subcommands:
    validate         (A1)-(A3) report
    profile          U(s, eta, R) as CSV s,u,u_prime (or r,sigma with --physical)
    critical-radius  R_c
    stationary       existence and structure of the dormant tumor
    thresholds       sigma_tilde, sigma*, R_c(sigma*)
    evolve           trajectory CSV t,R,phase plus JSON sidecar
    fate             long-time verdict with automatic horizon extension
    sweep            one of the above over a parameter axis

Exit codes: 0 success, 2 malformed input, 3 solver failure,
4 assumption violation.

Version: 1.0.0
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from fbtumor.config import OVERRIDE_FIELDS, load_params, parse_beta, thread_limit
from fbtumor.evolution import EVOLUTION_DEFAULTS, EvolutionOptions, evolve, fate
from fbtumor.exceptions import (
    AssumptionViolationError,
    FBTumorError,
    ValidationError,
)
from fbtumor.free_boundary import assemble_state, critical_radius
from fbtumor.model_core import ModelParams, ensure_valid, validate_params
from fbtumor.monitoring import METRICS
from fbtumor.profile_solver import SOLVER_DEFAULTS, solve_profile
from fbtumor.stationary import classify, thresholds

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3
EXIT_ASSUMPTION = 4

COMMANDS = ("validate", "profile", "critical-radius", "stationary", "thresholds", "evolve", "fate", "sweep")
SWEEP_AXES = ("sigma_bar", "beta", "nu", "R0")
SWEEP_COMMANDS = ("stationary", "critical-radius", "thresholds", "fate")


@dataclass
class RunConfig:
    """
    One validated CLI invocation.

    Attributes:
        params: Model parameters (file merged with flag overrides)
        command: Subcommand name
        options: Command-specific options (R, eta, R0, t_end, sweep axis, ...)
        tol: Solver tolerance
        output: Output path; stdout when None
        fmt: "csv" or "json"
    """
    params: ModelParams
    command: str
    options: Dict[str, Any] = field(default_factory=dict)
    tol: float = SOLVER_DEFAULTS["tol"]
    output: Optional[Path] = None
    fmt: str = "json"


# =============================================================================
# FORMATTING
# =============================================================================

def format_number(value: Any) -> str:
    """CSV cell: floats with 17 significant digits, None as empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else str(number)
    return value


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buffer.getvalue()


def render_json(payload: Any) -> str:
    return json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n"


def _emit(config: RunConfig, text: str, sidecar: Optional[Dict[str, Any]] = None) -> None:
    """Write to --out (with a .json sidecar for tables) or stdout."""
    if config.output is None:
        sys.stdout.write(text)
        return
    config.output.parent.mkdir(parents=True, exist_ok=True)
    config.output.write_text(text, encoding="utf-8")
    if sidecar is not None and config.fmt == "csv":
        config.output.with_suffix(".json").write_text(render_json(sidecar), encoding="utf-8")


def _emit_table(config: RunConfig, header: Sequence[str], rows: Sequence[Sequence[Any]], meta: Dict[str, Any]) -> None:
    if config.fmt == "csv":
        _emit(config, render_csv(header, rows), meta)
    else:
        records = [dict(zip(header, row)) for row in rows]
        _emit(config, render_json({**meta, "rows": records}))


def _emit_record(config: RunConfig, record: Dict[str, Any]) -> None:
    if config.fmt == "csv":
        flat = {k: v for k, v in record.items() if not isinstance(v, (dict, list))}
        _emit(config, render_csv(list(flat), [list(flat.values())]))
    else:
        _emit(config, render_json(record))


# =============================================================================
# COMMANDS
# =============================================================================

def _evolution_options(options: Dict[str, Any], tol: float) -> EvolutionOptions:
    return EvolutionOptions(
        tol=options.get("evolution_tol") or EVOLUTION_DEFAULTS["tol"],
        max_steps=options.get("max_steps") or EVOLUTION_DEFAULTS["max_steps"],
        convergence_eps=options.get("convergence_eps") or EVOLUTION_DEFAULTS["convergence_eps"],
        solver_tol=tol,
    )


def _run_validate(config: RunConfig) -> int:
    report = validate_params(config.params)
    _emit(config, render_json(report.to_dict()))
    return EXIT_OK if report.ok else EXIT_ASSUMPTION


def _run_profile(config: RunConfig) -> int:
    R, eta = config.options["R"], config.options.get("eta") or 0.0
    if config.options.get("physical"):
        state = assemble_state(R, config.params, config.tol)
        _emit_table(config, ("r", "sigma"), state.to_rows(), state.summary())
        return EXIT_OK
    profile = solve_profile(eta, R, config.params, config.tol)
    _emit_table(config, ("s", "u", "u_prime"), profile.to_rows(), profile.sidecar())
    return EXIT_OK


def _run_evolve(config: RunConfig) -> int:
    traj = evolve(
        config.options["R0"],
        config.options["t_end"],
        config.params,
        _evolution_options(config.options, config.tol),
    )
    _emit_table(config, ("t", "R", "phase"), traj.to_rows(), traj.sidecar())
    return EXIT_OK


def _single_result(command: str, p: ModelParams, tol: float, options: Dict[str, Any]) -> Dict[str, Any]:
    """Result record of a scalar command; also used per sweep point."""
    if command == "critical-radius":
        return {"R_c": critical_radius(p, tol)}
    if command == "stationary":
        return classify(p, tol, with_sigma_star=not options.get("in_sweep", False)).to_dict()
    if command == "thresholds":
        return thresholds(p, tol).to_dict()
    if command == "fate":
        return fate(options["R0"], p, _evolution_options(options, tol)).to_dict()
    raise ValidationError(f"unknown command {command!r}", field="command", value=command)


SWEEP_COLUMNS: Dict[str, Tuple[str, ...]] = {
    "stationary": ("exists", "R_s", "classification"),
    "critical-radius": ("R_c",),
    "thresholds": ("sigma_tilde", "sigma_star", "R_c_at_sigma_star"),
    "fate": ("verdict", "R_s", "T_transition", "direction"),
}


def sweep_point(task: Tuple[int, str, ModelParams, str, float, float, Dict[str, Any]]) -> Tuple[int, List[Any]]:
    """Evaluate one sweep grid point; module-level so worker processes can unpickle it."""
    index, command, base, axis, value, tol, options = task
    options = dict(options, in_sweep=True)
    if axis == "R0":
        params = base
        options["R0"] = value
    else:
        params = base.replace(**{axis: value})
    ensure_valid(params)
    with METRICS.timer("sweep_point_seconds", {"command": command}):
        record = _single_result(command, params, tol, options)
    return index, [value] + [record.get(column) for column in SWEEP_COLUMNS[command]]


def sweep_grid(start: float, stop: float, count: int, spacing: str) -> np.ndarray:
    if spacing == "log":
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def _run_sweep(config: RunConfig) -> int:
    opts = config.options
    grid = sweep_grid(opts["start"], opts["stop"], opts["count"], opts["spacing"])
    task_options = {k: v for k, v in opts.items() if k in ("R0", "evolution_tol", "max_steps", "convergence_eps")}
    tasks = [
        (i, opts["sweep_command"], config.params, opts["axis"], float(v), config.tol, task_options)
        for i, v in enumerate(grid)
    ]
    workers = min(thread_limit(), len(tasks))
    logger.info(f"sweep {opts['sweep_command']} over {opts['axis']}: {len(tasks)} points, {workers} workers")

    if workers <= 1:
        results = [sweep_point(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(sweep_point, tasks))

    rows = [row for _, row in sorted(results, key=lambda item: item[0])]
    header = (opts["axis"],) + SWEEP_COLUMNS[opts["sweep_command"]]
    meta = {
        "axis": opts["axis"],
        "command": opts["sweep_command"],
        "from": opts["start"],
        "to": opts["stop"],
        "count": opts["count"],
        "spacing": opts["spacing"],
    }
    _emit_table(config, header, rows, meta)
    return EXIT_OK


def run(config: RunConfig) -> int:
    """
    Dispatch a validated configuration.

    Returns:
        Process exit status

    Raises:
        FBTumorError: Propagated from the solver layers (mapped by ``main``)
    """
    logger.debug(f"run {config.command} options={config.options}")
    with METRICS.timer("command_seconds", {"command": config.command}):
        if config.command == "validate":
            return _run_validate(config)
        ensure_valid(config.params)
        if config.command == "profile":
            return _run_profile(config)
        if config.command == "evolve":
            return _run_evolve(config)
        if config.command == "sweep":
            return _run_sweep(config)
        record = _single_result(config.command, config.params, config.tol, config.options)
        _emit_record(config, record)
        return EXIT_OK


# =============================================================================
# ARGUMENT PARSING
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON parameter file")
    common.add_argument("--sigma-bar", dest="sigma_bar", type=float, help="Override sigma_bar")
    common.add_argument("--beta", type=parse_beta, help="Override beta (number or 'inf')")
    common.add_argument("--nu", type=float, help="Override nu")
    common.add_argument("--sigma-D", dest="sigma_D", type=float, help="Override sigma_D")
    common.add_argument("--tol", type=float, default=SOLVER_DEFAULTS["tol"], help="Solver tolerance")
    common.add_argument("--out", type=Path, help="Output file (stdout by default)")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), help="Output format")
    common.add_argument(
        "--log-level",
        default="WARNING",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="Logging level on stderr",
    )

    evolution = argparse.ArgumentParser(add_help=False)
    evolution.add_argument("--evolution-tol", type=float, help="Integrator tolerance on ln R")
    evolution.add_argument("--max-steps", type=int, help="Accepted-step budget")
    evolution.add_argument("--convergence-eps", type=float, help="Relative distance to R_s counted as converged")

    parser = argparse.ArgumentParser(prog="fbtumor", description="Free-boundary tumor model solver")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    sub.add_parser("validate", parents=[common], help="Check assumptions (A1)-(A3)")

    profile = sub.add_parser("profile", parents=[common], help="Stationary nutrient profile")
    profile.add_argument("--R", type=float, required=True)
    profile.add_argument("--eta", type=float, default=0.0)
    profile.add_argument("--physical", action="store_true", help="Emit the assembled r,sigma profile")

    sub.add_parser("critical-radius", parents=[common], help="Critical radius R_c")
    sub.add_parser("stationary", parents=[common], help="Dormant tumor existence and structure")
    sub.add_parser("thresholds", parents=[common], help="sigma_tilde, sigma*, R_c(sigma*)")

    ev = sub.add_parser("evolve", parents=[common, evolution], help="Integrate R(t)")
    ev.add_argument("--R0", type=float, required=True)
    ev.add_argument("--t-end", dest="t_end", type=float, required=True)

    ft = sub.add_parser("fate", parents=[common, evolution], help="Long-time verdict")
    ft.add_argument("--R0", type=float, required=True)

    sw = sub.add_parser("sweep", parents=[common, evolution], help="Parameter sweep")
    sw.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sw.add_argument("--from", dest="start", type=float, required=True)
    sw.add_argument("--to", dest="stop", type=float, required=True)
    sw.add_argument("--count", type=int, required=True)
    sw.add_argument("--command", dest="sweep_command", choices=SWEEP_COMMANDS, required=True)
    sw.add_argument("--spacing", choices=("linear", "log"), default="linear")
    sw.add_argument("--R0", type=float, help="Initial radius for fate sweeps")
    return parser


_TABLE_COMMANDS = ("profile", "evolve", "sweep")
_OPTION_KEYS = (
    "R", "eta", "physical", "R0", "t_end", "evolution_tol", "max_steps", "convergence_eps",
    "axis", "start", "stop", "count", "sweep_command", "spacing",
)


def build_config(args: argparse.Namespace) -> RunConfig:
    """
    Turn parsed arguments into a RunConfig.

    Raises:
        ValidationError: Bad parameters, ranges or option combinations
    """
    overrides = {name: getattr(args, name, None) for name in OVERRIDE_FIELDS}
    params = load_params(args.config, overrides)
    options = {key: getattr(args, key) for key in _OPTION_KEYS if getattr(args, key, None) is not None}

    if not (args.tol > 0.0):
        raise ValidationError("tol must be positive", field="tol", value=args.tol, reason="non-positive")
    for key in ("R", "R0", "t_end", "evolution_tol", "convergence_eps"):
        if key in options and not options[key] > 0.0:
            raise ValidationError(f"{key} must be positive", field=key, value=options[key], reason="non-positive")

    if args.command == "sweep":
        if options["count"] < 1:
            raise ValidationError("count must be at least 1", field="count", value=options["count"], reason="non-positive")
        if not (options["start"] > 0.0 and options["stop"] > 0.0):
            raise ValidationError("sweep range must be positive", field="from", value=options["start"], reason="non-positive")
        if options["count"] > 1 and not options["start"] < options["stop"]:
            raise ValidationError("sweep range must be ordered", field="to", value=options["stop"], reason="unordered")
        if options["axis"] == "R0" and options["sweep_command"] != "fate":
            raise ValidationError("the R0 axis only applies to fate sweeps", field="axis", value="R0", reason="incompatible")
        if options["sweep_command"] == "fate" and options["axis"] != "R0" and "R0" not in options:
            raise ValidationError("fate sweeps need --R0", field="R0", reason="missing")

    fmt = args.fmt or ("csv" if args.command in _TABLE_COMMANDS else "json")
    return RunConfig(
        params=params,
        command=args.command,
        options=options,
        tol=args.tol,
        output=args.out,
        fmt=fmt,
    )


def exit_code_for(error: FBTumorError) -> int:
    if isinstance(error, AssumptionViolationError):
        return EXIT_ASSUMPTION
    if isinstance(error, ValidationError):
        return EXIT_INVALID
    return EXIT_SOLVER


def main(argv: Optional[List[str]] = None) -> int:
    """Console entry point; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = build_config(args)
        status = run(config)
    except FBTumorError as exc:
        code = exit_code_for(exc)
        sys.stderr.write(f"fbtumor {args.command}: {exc.__class__.__name__}: {exc.message}\n")
        logger.debug(f"error details: {exc.to_dict()}")
        return code
    logger.info(f"metrics: {METRICS.get_all_metrics()}")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
