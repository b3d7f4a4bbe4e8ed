"""Monte Carlo comparison of relay schemes over channel realizations.

Every (axis value, scheme) pair sees the same channel draws: realization
``i`` uses seed ``split_seed(seed, i)`` whatever the axis value, so scheme
differences are paired and sweeps are reproducible.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, decompose, generate_channels, split_seed
from .config import ConfigError, SystemConfig, dbm_to_watts, watts_to_dbm, with_cancellation
from .ellipsoid import EllipsoidBreakdown, solve
from .solver import PrimalSolution, rsi_fixed_point

SCHEMES = ("fd_nonuniform", "fd_uniform", "fd_no_si_harvest", "fd_csir", "fd_passive",
           "fd_hybrid", "half_duplex")
AXES = ("ps_dbm", "nr", "d_sr")
WORKERS_ENV = "FDRELAY_WORKERS"

# errors that mark a single realization as failed instead of aborting a sweep
_SOLVER_ERRORS = (ArithmeticError, EllipsoidBreakdown, np.linalg.LinAlgError)


@dataclass(frozen=True)
class SweepSpec:
    base: SystemConfig
    axis: str
    values: tuple
    schemes: tuple
    realizations: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"must be one of {AXES}", "axis")
        if not self.values:
            raise ConfigError("needs at least one value", "values")
        if list(self.values) != sorted(self.values):
            raise ConfigError("must be sorted ascending", "values")
        if not self.schemes:
            raise ConfigError("needs at least one scheme", "schemes")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}; choose from {SCHEMES}", "schemes")
        if self.realizations < 1:
            raise ConfigError("must be >= 1", "realizations")

    def config_at(self, value) -> SystemConfig:
        if self.axis == "ps_dbm":
            return self.base.replace(ps_watts=dbm_to_watts(float(value)))
        if self.axis == "nr":
            return self.base.replace(nr=int(value))
        return self.base.replace(d_sr=float(value))


@dataclass(frozen=True)
class SweepRow:
    """One (realization, scheme) outcome; ``failed`` rows are excluded from means."""

    seed: int
    scheme: str
    axis_value: float
    ns: int
    nr: int
    nd: int
    ps_dbm: float
    d_sr_m: float
    rate: float
    pr: float
    iterations: int
    converged: bool
    failed: bool = False


@dataclass(frozen=True)
class SweepRecord:
    axis_value: float
    scheme: str
    mean_rate: float
    rate_std_error: float
    mean_pr: float
    zero_rate_fraction: float
    mean_iterations: float
    realizations: int
    failures: int = 0


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    records: list = field(default_factory=list)


def _solve_fd(eff, cfg: SystemConfig, kind: str) -> PrimalSolution:
    """Solve one full-duplex variant; proportional RSI goes through the fixed point."""
    if cfg.rsi_mode == "proportional":
        return rsi_fixed_point(lambda c: solve(eff, c, kind, record_trace=False), cfg)
    sol, report = solve(eff, cfg, kind, record_trace=False)
    sol.notes.update(iterations=report.iterations, converged=report.converged,
                     status=report.status)
    return sol


def _converged(sol: PrimalSolution) -> bool:
    if "rsi_converged" in sol.notes:
        return bool(sol.notes["rsi_converged"])
    return bool(sol.notes.get("converged", True))


def run_scheme(realization: ChannelRealization, cfg: SystemConfig, scheme: str) -> PrimalSolution:
    """Optimize one realization under one comparison scheme.

    ``notes`` on the result carry ``iterations`` and ``converged``.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    eff = decompose(realization)
    if scheme == "fd_nonuniform":
        return _solve_fd(eff, cfg, "nonuniform")
    if scheme == "fd_uniform":
        return _solve_fd(eff, cfg, "uniform")
    if scheme == "fd_csir":
        return _solve_fd(eff, cfg, "csir")
    if scheme == "fd_no_si_harvest":
        return _solve_fd(eff, cfg.replace(si_harvest_enabled=False), "nonuniform")
    if scheme == "fd_passive":
        return _solve_fd(eff, with_cancellation(cfg, "passive"), "nonuniform")
    if scheme == "fd_hybrid":
        active = _solve_fd(eff, with_cancellation(cfg, "active"), "nonuniform")
        passive = _solve_fd(eff, with_cancellation(cfg, "passive"), "nonuniform")
        best = active if active.rate >= passive.rate else passive
        out = best.copy()
        out.notes.update(
            hybrid_choice="active" if best is active else "passive",
            iterations=active.notes.get("iterations", 0) + passive.notes.get("iterations", 0),
            converged=_converged(active) and _converged(passive),
        )
        out.notes.pop("rsi_converged", None)
        return out
    # half duplex: no loop-back channel, no residual SI, no cancellation
    # circuit, and the two hops share the time slot
    hd_cfg = cfg.replace(sigma_f2=0.0, p_ic_watts=0.0, rsi_mode="constant")
    sol = _solve_fd(eff.without_si(), hd_cfg, "nonuniform")
    sol.rate *= 0.5
    sol.notes["time_share"] = 0.5
    return sol


def _one(args) -> list:
    cfg, axis_value, schemes, seed = args
    realization = generate_channels(cfg, seed)
    rows = []
    for scheme in schemes:
        try:
            sol = run_scheme(realization, cfg, scheme)
            rows.append(SweepRow(seed, scheme, axis_value, cfg.ns, cfg.nr, cfg.nd,
                                 watts_to_dbm(cfg.ps_watts) if cfg.ps_watts > 0 else -math.inf,
                                 cfg.d_sr, float(sol.rate), float(sol.pr),
                                 int(sol.notes.get("iterations", 0)), _converged(sol)))
        except _SOLVER_ERRORS:
            rows.append(SweepRow(seed, scheme, axis_value, cfg.ns, cfg.nr, cfg.nd,
                                 watts_to_dbm(cfg.ps_watts) if cfg.ps_watts > 0 else -math.inf,
                                 cfg.d_sr, math.nan, math.nan, 0, False, failed=True))
    return rows


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {value!r}") from None


def aggregate(rows, axis_value, scheme) -> SweepRecord:
    mine = [r for r in rows if r.axis_value == axis_value and r.scheme == scheme]
    ok = [r for r in mine if not r.failed]
    rates = np.array([r.rate for r in ok])
    n = rates.size
    if n == 0:
        return SweepRecord(axis_value, scheme, math.nan, math.nan, math.nan, math.nan, math.nan,
                           0, len(mine))
    se = float(rates.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SweepRecord(
        axis_value=axis_value,
        scheme=scheme,
        mean_rate=float(rates.mean()),
        rate_std_error=se,
        mean_pr=float(np.mean([r.pr for r in ok])),
        zero_rate_fraction=float(np.mean(rates <= 0.0)),
        mean_iterations=float(np.mean([r.iterations for r in ok])),
        realizations=n,
        failures=len(mine) - n,
    )


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Solve every (axis value, realization, scheme) and aggregate per (value, scheme).

    Rows come back ordered by axis value, then realization index, then the
    scheme order of ``spec``, independent of ``workers``.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    tasks = [(spec.config_at(v), v, tuple(spec.schemes), split_seed(spec.seed, i))
             for v in spec.values for i in range(spec.realizations)]
    if workers == 1 or len(tasks) == 1:
        chunks = [_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_one, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    rows = [r for chunk in chunks for r in chunk]
    records = [aggregate(rows, v, s) for v in spec.values for s in spec.schemes]
    return SweepResult(rows, records)
