"""Central-cut ellipsoid minimization of the dual function, and the full solve loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .channel import EffectiveChannel
from .config import SystemConfig
from .solver import (
    LN2,
    DualPoint,
    InadmissibleDual,
    LinkModel,
    PrimalSolution,
    RunawayRecycling,
    allocate_fixed_rho,
    dual_subgradient,
    finish_csir,
    lagrangian,
    primal_update_csir,
    primal_update_nonuniform,
    primal_update_uniform,
)

OBJECTIVE = "objective"
FEASIBILITY = "feasibility"


class EllipsoidBreakdown(FloatingPointError):
    """Shape matrix lost positive definiteness beyond repair."""


@dataclass
class EllipsoidState:
    center: np.ndarray
    shape: np.ndarray
    best_dual_value: float = math.inf
    best_dual_point: np.ndarray | None = None
    iteration: int = 0

    @property
    def n(self) -> int:
        return self.center.size

    def copy(self) -> "EllipsoidState":
        best = None if self.best_dual_point is None else self.best_dual_point.copy()
        return EllipsoidState(self.center.copy(), self.shape.copy(), self.best_dual_value, best,
                              self.iteration)

    def gap_bound(self, subgradient) -> float:
        """Upper bound on ``g(center) - min g`` over the ellipsoid: ``sqrt(g' P g)``."""
        g = np.asarray(subgradient, dtype=float)
        return math.sqrt(max(float(g @ self.shape @ g), 0.0))


def ellipsoid_step(state: EllipsoidState, cut, kind: str = OBJECTIVE,
                   value: float | None = None) -> EllipsoidState:
    """Shrink the ellipsoid to the minimum-volume one containing the kept half.

    Keeps ``{z : cut . (z - center) <= 0}``.  For objective cuts, ``value``
    is the dual value at the current center and updates the tracked best.
    """
    cut = np.asarray(cut, dtype=float)
    if not np.any(cut):
        raise ValueError("cut must be non-zero")
    n = state.n
    shape = state.shape
    quad = float(cut @ shape @ cut)
    if not quad > 0.0:
        shape = 0.5 * (shape + shape.T) + 1e-12 * np.eye(n)
        quad = float(cut @ shape @ cut)
        if not quad > 0.0:
            raise EllipsoidBreakdown(f"cut'Pcut = {quad:g} after jitter")

    new = state.copy()
    if kind == OBJECTIVE and value is not None and value < state.best_dual_value:
        new.best_dual_value = float(value)
        new.best_dual_point = state.center.copy()

    pg = shape @ cut / math.sqrt(quad)
    new.center = state.center - pg / (n + 1)
    if n == 1:
        new.shape = shape * (n / (n + 1)) ** 2
    else:
        new.shape = n * n / (n * n - 1.0) * (shape - 2.0 / (n + 1) * np.outer(pg, pg))
    new.shape = 0.5 * (new.shape + new.shape.T)
    new.iteration = state.iteration + 1
    return new


@dataclass
class SolveReport:
    iterations: int = 0
    converged: bool = False
    gap_bound: float = math.inf
    dual_value: float = math.inf  # best dual value, bits/s/Hz
    duality_gap: float = math.inf  # dual_value - achievable rate, bits/s/Hz
    dual_point: tuple = ()
    status: str = "ok"
    trace: list = field(default_factory=list)  # (iteration, best dual [bits], current rate [bits])


def _zero_solution(m: LinkModel, scheme: str) -> PrimalSolution:
    return PrimalSolution(p=np.zeros(m.k1), q=np.zeros(m.k2), rho=np.full(m.nr, m.eps),
                          pr=0.0, feasible=False, scheme=scheme)


def repair(m: LinkModel, sol: PrimalSolution) -> PrimalSolution:
    """Scale p, then q, until both power constraints hold; recompute rates.

    The Lagrangian maximizer at the best dual point may overshoot the power
    budgets slightly.  The returned rate is achievable, not a dual estimate.
    """
    if sol.scheme == "csir":
        return finish_csir(m, sol.rho)
    p = sol.p * min(1.0, m.ps / sol.p.sum()) if sol.p.sum() > 0.0 else sol.p.copy()
    budget = m.source_harvest(p, sol.rho) - m.pic
    spend = float(np.dot(sol.q, m.recycle_coeff(sol.rho)))
    if budget <= 0.0:
        q = np.zeros_like(sol.q)
    elif spend > budget:
        q = sol.q * (budget / spend)
    else:
        q = sol.q.copy()
    out = PrimalSolution(p=p, q=q, rho=sol.rho.copy(), scheme=sol.scheme, notes=dict(sol.notes))
    out.r1 = m.r1_nats(p, sol.rho) / LN2
    out.r2 = m.r2_nats(q) / LN2
    out.pr = m.relay_power(p, q, sol.rho)
    out.feasible = budget > 0.0 and out.pr >= 0.0
    out.rate = min(out.r1, out.r2) if out.feasible else 0.0
    return out


def received_rf_power(m: LinkModel, sol: PrimalSolution) -> float:
    """Total RF power reaching the relay's splitters (source + harvestable SI)."""
    gains = np.asarray(m.eff.f_tilde_sq, dtype=float)
    if sol.scheme == "csir":
        si = max(sol.pr, 0.0) / m.nr * float(gains.sum())
    else:
        si = float(gains[:, : m.k2].sum(axis=0) @ sol.q)
    return float(np.dot(m.lam_h, sol.p)) + si


def _inner(m: LinkModel, scheme: str, dual: DualPoint, warm: PrimalSolution,
           max_passes: int, tol: float) -> PrimalSolution:
    """Repeat closed-form passes at a fixed dual point until the primal settles."""
    sol = warm
    for _ in range(max_passes):
        if scheme == "csir":
            new = primal_update_csir(dual, m, m.cfg, sol.notes.get("pr_lagrangian"))
            moved = abs(new.notes["pr_lagrangian"] - sol.notes.get("pr_lagrangian", math.inf))
            moved /= max(new.notes["pr_lagrangian"], 1e-300)
        else:
            update = primal_update_nonuniform if scheme == "nonuniform" else primal_update_uniform
            new = update(dual, m, m.cfg, sol)
            moved = max(
                float(np.max(np.abs(new.p - sol.p), initial=0.0)) / m.ps,
                float(np.max(np.abs(new.q - sol.q), initial=0.0)) / max(float(new.q.max(initial=0.0)), 1e-300),
            )
        moved = max(moved, float(np.max(np.abs(new.rho - sol.rho))))
        sol = new
        if moved <= tol:
            break
    return sol


def _initial(m: LinkModel, scheme: str):
    pr_max = m.max_source_harvest() - m.pic
    mu0 = max(m.k2, 1) / pr_max
    a_max = float(m.harv.max(initial=0.0))
    nu0 = (1.0 - m.eps) * mu0 * a_max + m.k1 / m.ps
    warm = PrimalSolution(p=np.full(m.k1, m.ps / m.k1), q=np.full(m.k2, pr_max / m.k2),
                          rho=np.full(m.nr, 1.0 - m.eps), scheme=scheme)
    if scheme == "csir":
        center = np.array([0.5, mu0])
        shape = np.diag([0.25, (10.0 * mu0) ** 2])
        warm.notes["pr_lagrangian"] = pr_max
    else:
        center = np.array([0.5, nu0, mu0])
        shape = np.diag([0.25, (10.0 * nu0) ** 2, (10.0 * mu0) ** 2])
    return EllipsoidState(center, shape), warm


def _domain_cut(m: LinkModel, scheme: str, x: np.ndarray):
    """Normal of a violated dual-domain constraint, or None inside the domain."""
    alpha = x[0]
    mu = x[-1]
    if alpha < 0.0:
        return np.eye(x.size)[0] * -1.0
    if alpha > 1.0:
        return np.eye(x.size)[0]
    if mu <= 0.0:
        return np.eye(x.size)[-1] * -1.0
    if scheme != "csir":
        a_max = float(m.harv.max(initial=0.0))
        if x[1] <= (1.0 - m.eps) * mu * a_max:
            return np.array([0.0, -1.0, (1.0 - m.eps) * a_max])
    return None


def _project_cut(normal: np.ndarray, n: int) -> np.ndarray:
    return normal if n == 3 else normal[[0, 2]]


def _polish_uniform(m: LinkModel, xatol: float = 1e-7) -> PrimalSolution | None:
    """Line search on the shared splitting ratio with exact power allocation.

    With one ratio for all beams the Lagrangian is not jointly concave in
    (rho, p), so the coordinate-wise maximizer can stop short of the best
    ratio.  The rate is unimodal in the shared ratio, so a bounded scalar
    search recovers it.
    """
    def rate(x: float) -> float:
        try:
            return allocate_fixed_rho(m, np.full(m.nr, x), "uniform").rate
        except RunawayRecycling:
            return 0.0

    res = minimize_scalar(lambda x: -rate(x), bounds=(m.eps, 1.0 - m.eps), method="bounded",
                          options={"xatol": xatol})
    best_x = max((float(res.x), 1.0 - m.eps), key=rate)
    try:
        return allocate_fixed_rho(m, np.full(m.nr, best_x), "uniform")
    except RunawayRecycling:
        return None


def _polish_nonuniform(m: LinkModel, rho0, xtol: float = 1e-5) -> PrimalSolution | None:
    """Local search on the source-beam splitting ratios with exact power allocation.

    At the dual optimum the Lagrangian maximizer is often not unique, and
    the ratios read off it can sit well away from the primal optimum even
    though the dual value is tight.  Beams without source power keep their
    ratio (harvest-only beams are best at the upper clamp).
    """
    rho0 = np.asarray(rho0, dtype=float)
    k1 = m.k1

    def full(x):
        r = rho0.copy()
        r[:k1] = np.clip(x, m.eps, 1.0 - m.eps)
        return r

    def neg_rate(x) -> float:
        try:
            return -allocate_fixed_rho(m, full(x), "nonuniform").rate
        except RunawayRecycling:
            return 0.0

    res = minimize(neg_rate, rho0[:k1], method="Powell",
                   bounds=[(m.eps, 1.0 - m.eps)] * k1,
                   options={"xtol": xtol, "ftol": 1e-10, "maxfev": 200 * k1})
    try:
        return allocate_fixed_rho(m, full(res.x), "nonuniform")
    except RunawayRecycling:
        return None


def solve(eff: EffectiveChannel, cfg: SystemConfig, scheme: str = "nonuniform",
          max_inner_passes: int = 30, inner_tol: float = 1e-12,
          record_trace: bool = True, polish_rtol: float = 1e-5) -> tuple[PrimalSolution, SolveReport]:
    """Primal-dual solution of one realization for one splitting scheme.

    ``scheme`` is ``"nonuniform"``, ``"uniform"`` or ``"csir"``.  Stops when
    the ellipsoid bound on the remaining dual suboptimality drops below
    ``cfg.epsilon_precision`` or after ``cfg.max_iterations`` steps.

    The primal point is recovered from the best dual point: its splitting
    ratios are kept and the power allocation re-solved exactly; if the
    result still trails the dual bound by more than ``polish_rtol``
    (relative), the ratios are refined by a local search.
    """
    if scheme not in ("nonuniform", "uniform", "csir"):
        raise ValueError(f"unknown scheme {scheme!r}")
    m = eff if isinstance(eff, LinkModel) else LinkModel(eff, cfg)
    report = SolveReport()
    if m.k1 == 0 or m.k2 == 0:
        report.status = "degenerate"
        report.converged = True
        report.dual_value = report.duality_gap = 0.0
        return _zero_solution(m, scheme), report
    if m.max_source_harvest(scheme) <= m.pic:
        report.status = "infeasible"
        report.converged = True
        report.dual_value = report.duality_gap = 0.0
        return _zero_solution(m, scheme), report
    if m.runaway():
        report.status = "runaway"
        return _zero_solution(m, scheme), report

    state, warm = _initial(m, scheme)
    n = state.n
    best_primal = None
    current_rate = 0.0
    for it in range(cfg.max_iterations):
        x = state.center
        normal = _domain_cut(m, scheme, x)
        if normal is None:
            dual = DualPoint.from_array(x)
            try:
                sol = _inner(m, scheme, dual, warm, max_inner_passes, inner_tol)
            except InadmissibleDual as exc:
                normal = _project_cut(exc.normal, n)
            except RunawayRecycling:
                report.status = "runaway"
                break
        if normal is not None:
            state = ellipsoid_step(state, normal, FEASIBILITY)
        else:
            warm = sol
            value = lagrangian(dual, sol, m, cfg)
            sub = dual_subgradient(sol, m, cfg)
            if n == 2:
                sub = sub[[0, 2]]
            if value < state.best_dual_value:
                best_primal = sol
            current_rate = repair(m, sol).rate if record_trace else current_rate
            bound = state.gap_bound(sub)
            report.gap_bound = bound
            if bound <= cfg.epsilon_precision or not np.any(sub):
                if value < state.best_dual_value:
                    state.best_dual_value, state.best_dual_point = value, x.copy()
                report.converged = True
                if record_trace:
                    report.trace.append((it, state.best_dual_value / LN2, current_rate))
                break
            state = ellipsoid_step(state, sub, OBJECTIVE, value)
        if record_trace:
            report.trace.append((it, state.best_dual_value / LN2, current_rate))
    report.iterations = it + 1

    if best_primal is None:
        report.status = "no-interior-point" if report.status == "ok" else report.status
        return _zero_solution(m, scheme), report

    out = repair(m, best_primal)
    if scheme != "csir":
        # The Lagrangian maximizer is ill-conditioned when a constraint's
        # multiplier vanishes at the optimum; keep its splitting ratios and
        # re-solve the (convex) power allocation exactly.
        try:
            completed = allocate_fixed_rho(m, best_primal.rho, scheme)
        except RunawayRecycling:
            completed = None
        if completed is not None and completed.rate > out.rate:
            completed.notes["recovered_from"] = out.rate
            out = completed
        bound = state.best_dual_value / LN2
        if bound - out.rate > polish_rtol * max(1.0, out.rate):
            polished = _polish_uniform(m) if scheme == "uniform" else _polish_nonuniform(m, out.rho)
            if polished is not None and polished.rate > out.rate:
                polished.notes["recovered_from"] = out.rate
                out = polished
    if received_rf_power(m, out) < cfg.eh_sensitivity_watts:
        out.rate, out.feasible = 0.0, False
        out.notes["below_sensitivity"] = True
    report.dual_value = state.best_dual_value / LN2
    report.duality_gap = report.dual_value - out.rate
    if record_trace and report.trace:
        # the last row reports the recovered primal point
        report.trace[-1] = (report.trace[-1][0], report.dual_value, out.rate)
    report.dual_point = tuple(float(v) for v in state.best_dual_point)
    return out, report
