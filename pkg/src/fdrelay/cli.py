"""Command-line front end.

    python -m fdrelay solve       --config scenario.cfg --seed 3
    python -m fdrelay sweep       --config sweep.cfg --output raw.csv
    python -m fdrelay oracle      --config scenario.cfg --seed 3
    python -m fdrelay convergence --config scenario.cfg --seed 3 --output trace.csv

Exit codes: 0 success, 2 configuration error, 3 solver abort.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .channel import decompose, generate_channels
from .config import ConfigError, SystemConfig, load_config, parse_config_text, watts_to_dbm
from .ellipsoid import EllipsoidBreakdown, solve
from .experiments import SCHEMES, SweepSpec, default_workers, run_sweep
from .oracle import OracleRefused, oracle_solve
from .solver import LN2, rsi_fixed_point

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

RAW_COLUMNS = ("seed", "scheme", "ns", "nr", "nd", "ps_dbm", "d_sr_m", "rate_bps_hz", "pr_watts",
               "iterations", "converged")
AGG_COLUMNS = ("axis_value", "scheme", "mean_rate", "std_error", "zero_rate_fraction", "n")
SOLVER_SCHEMES = ("nonuniform", "uniform", "csir")


class SolverAbort(RuntimeError):
    pass


def _num(x):
    """JSON-safe float: non-finite values become null."""
    x = float(x)
    return x if math.isfinite(x) else None


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _read_config(path):
    if path is None:
        return SystemConfig(), {}
    try:
        return load_config(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc


def _seed(args, extra) -> int:
    if args.seed is not None:
        return args.seed
    try:
        return int(extra.get("seed", 0))
    except ValueError:
        raise ConfigError("must be an integer", "seed") from None


def _emit(text: str, output) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _solve_one(cfg: SystemConfig, seed: int, scheme: str):
    eff = decompose(generate_channels(cfg, seed))
    last = {}

    def run(c):
        sol, report = solve(eff, c, scheme)
        last["report"] = report
        return sol, report

    try:
        if cfg.rsi_mode == "proportional":
            sol = rsi_fixed_point(run, cfg)
        else:
            sol, _ = run(cfg)
    except (ArithmeticError, EllipsoidBreakdown, np.linalg.LinAlgError) as exc:
        raise SolverAbort(f"solver aborted: {exc}") from exc
    return sol, last["report"]


def cmd_solve(args) -> int:
    cfg, extra = _read_config(args.config)
    seed = _seed(args, extra)
    sol, report = _solve_one(cfg, seed, args.scheme)
    doc = {
        "seed": seed,
        "scheme": args.scheme,
        "rate": _num(sol.rate),
        "r1": _num(sol.r1),
        "r2": _num(sol.r2),
        "pr": _num(sol.pr),
        "p": [_num(v) for v in sol.p],
        "q": [_num(v) for v in sol.q],
        "rho": [_num(v) for v in sol.rho],
        "iterations": report.iterations,
        "converged": bool(report.converged),
        "status": report.status,
        "dual_point": [_num(v) for v in report.dual_point],
        "duality_gap_estimate": _num(report.duality_gap),
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.output)
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg, extra = _read_config(args.config)
    seed = _seed(args, extra)
    eff = decompose(generate_channels(cfg, seed))
    try:
        res = oracle_solve(eff, cfg, args.scheme)
    except OracleRefused as exc:
        raise SolverAbort(str(exc)) from exc
    doc = {
        "seed": seed,
        "scheme": args.scheme,
        "rate": _num(res.rate),
        "p": [_num(v) for v in res.p],
        "q": [_num(v) for v in res.q],
        "rho": [_num(v) for v in res.rho],
        "refinement_history": [_num(v) for v in res.history],
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.output)
    return EXIT_OK


def cmd_convergence(args) -> int:
    cfg, extra = _read_config(args.config)
    seed = _seed(args, extra)
    if cfg.rsi_mode == "proportional":
        raise ConfigError("convergence traces need rsi_mode = constant", "rsi_mode")
    _, report = _solve_one(cfg, seed, args.scheme)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("iteration", "best_dual_value", "current_primal_rate"))
    for it, best, rate in report.trace:
        w.writerow((it, _fmt(float(best)), _fmt(float(rate))))
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def _sweep_spec(cfg: SystemConfig, extra: dict, seed: int) -> SweepSpec:
    axis = extra.get("axis", "ps_dbm").strip()
    cast = int if axis == "nr" else float
    try:
        values = tuple(cast(v) for v in extra.get("values", "").replace(",", " ").split())
    except ValueError:
        raise ConfigError("values must be a list of numbers", "values") from None
    if not values:
        if "values" in extra:
            raise ConfigError("needs at least one value", "values")
        values = (watts_to_dbm(cfg.ps_watts),) if axis == "ps_dbm" else (
            (cfg.nr,) if axis == "nr" else (cfg.d_sr,))
    schemes = tuple(s for s in extra.get("schemes", "fd_nonuniform").replace(",", " ").split())
    try:
        realizations = int(extra.get("realizations", 500))
    except ValueError:
        raise ConfigError("must be an integer", "realizations") from None
    return SweepSpec(cfg, axis, values, schemes, realizations, seed)


def _sidecar(output, suffix: str):
    if output is None:
        return None
    p = Path(output)
    return p.with_name(p.stem + suffix)


def cmd_sweep(args) -> int:
    cfg, extra = _read_config(args.config)
    seed = _seed(args, extra)
    spec = _sweep_spec(cfg, extra, seed)
    if args.realizations is not None:
        spec = SweepSpec(spec.base, spec.axis, spec.values, spec.schemes, args.realizations, spec.seed)
    workers = args.workers if args.workers is not None else default_workers()
    result = run_sweep(spec, workers=workers)

    raw = io.StringIO()
    w = csv.writer(raw, lineterminator="\n")
    w.writerow(RAW_COLUMNS)
    for r in result.rows:
        w.writerow((r.seed, r.scheme, r.ns, r.nr, r.nd, _fmt(float(r.ps_dbm)), _fmt(float(r.d_sr_m)),
                    _fmt(float(r.rate)), _fmt(float(r.pr)), r.iterations, _fmt(bool(r.converged))))
    agg = io.StringIO()
    w = csv.writer(agg, lineterminator="\n")
    w.writerow(AGG_COLUMNS)
    for rec in result.records:
        w.writerow((_fmt(float(rec.axis_value)), rec.scheme, _fmt(rec.mean_rate),
                    _fmt(rec.rate_std_error), _fmt(rec.zero_rate_fraction), rec.realizations))
    summary = {
        "axis": spec.axis,
        "values": [float(v) for v in spec.values],
        "schemes": list(spec.schemes),
        "realizations": spec.realizations,
        "seed": spec.seed,
        "records": [
            {
                "axis_value": float(rec.axis_value),
                "scheme": rec.scheme,
                "mean_rate": _num(rec.mean_rate),
                "std_error": _num(rec.rate_std_error),
                "mean_pr": _num(rec.mean_pr),
                "zero_rate_fraction": _num(rec.zero_rate_fraction),
                "mean_iterations": _num(rec.mean_iterations),
                "n": rec.realizations,
                "failures": rec.failures,
            }
            for rec in result.records
        ],
    }
    _emit(raw.getvalue(), args.output)
    agg_path = args.aggregate or _sidecar(args.output, "_aggregate.csv")
    summary_path = args.summary or _sidecar(args.output, "_summary.json")
    if agg_path is not None:
        Path(agg_path).write_text(agg.getvalue())
    if summary_path is not None:
        Path(summary_path).write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdrelay", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scheme_choices=SOLVER_SCHEMES, default_scheme="nonuniform"):
        p.add_argument("--config", help="key = value scenario file (defaults when omitted)")
        p.add_argument("--seed", type=int, help="channel seed (overrides the config's seed)")
        p.add_argument("--output", "-o", help="output file (stdout when omitted)")
        if scheme_choices:
            p.add_argument("--scheme", choices=scheme_choices, default=default_scheme)

    common(sub.add_parser("solve", help="primal-dual solve of one realization"))
    common(sub.add_parser("oracle", help="brute-force optimum of one small realization"))
    common(sub.add_parser("convergence", help="per-iteration dual/primal trace"))
    sp = sub.add_parser("sweep", help="Monte Carlo sweep over one axis")
    common(sp, scheme_choices=None)
    sp.add_argument("--aggregate", help="aggregated CSV path (default: <output>_aggregate.csv)")
    sp.add_argument("--summary", help="JSON summary path (default: <output>_summary.json)")
    sp.add_argument("--realizations", type=int, help="override the config's realization count")
    sp.add_argument("--workers", type=int,
                    help="worker processes (default from $FDRELAY_WORKERS, else 1)")
    return parser


_COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "oracle": cmd_oracle,
             "convergence": cmd_convergence}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
