"""Rate/power evaluation and closed-form primal updates for the relay problem.

Conventions
-----------
Rates stored on :class:`PrimalSolution` are in bits/s/Hz.  The Lagrangian,
its dual function and the dual variables use natural-log rates: with that
scaling the coordinate updates below are the exact maximizers of the
Lagrangian.  ``nu`` and ``mu`` are therefore "nats per watt" and
``dual_value`` is in nats; divide by ``ln 2`` to compare with a rate in bits.

The Lagrangian being maximized is::

    L = a*R1 + (1-a)*R2 - nu*(sum(p) - Ps)
        - mu*(sum_j q_j*(1 - sum_k rho_k*|Ft_kj|^2) - sum_i lam_i*p_i*rho_i + P_IC)

with ``a`` the weight of the first hop (``alpha``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .channel import EffectiveChannel
from .config import SystemConfig

LN2 = math.log(2.0)
SCHEMES = ("nonuniform", "uniform", "csir")


class InadmissibleDual(ArithmeticError):
    """The Lagrangian is unbounded (or undefined) at this dual point.

    ``normal`` is the gradient, in ``(alpha, nu, mu)`` coordinates, of the
    violated constraint ``normal . x + offset <= 0``; the ellipsoid uses it
    as a feasibility cut.
    """

    def __init__(self, message: str, normal):
        super().__init__(message)
        self.normal = np.asarray(normal, dtype=float)


class RunawayRecycling(ArithmeticError):
    """Self-interference recycling gain >= 1: the relay would power itself."""


@dataclass(frozen=True)
class DualPoint:
    alpha: float
    nu: float = 0.0
    mu: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.nu, self.mu])

    @classmethod
    def from_array(cls, x) -> "DualPoint":
        x = np.asarray(x, dtype=float)
        if x.size == 2:
            return cls(float(x[0]), 0.0, float(x[1]))
        return cls(float(x[0]), float(x[1]), float(x[2]))


@dataclass
class PrimalSolution:
    p: np.ndarray
    q: np.ndarray
    rho: np.ndarray
    r1: float = 0.0
    r2: float = 0.0
    rate: float = 0.0
    pr: float = 0.0
    feasible: bool = True
    scheme: str = "nonuniform"
    notes: dict = field(default_factory=dict)

    def copy(self) -> "PrimalSolution":
        return PrimalSolution(self.p.copy(), self.q.copy(), self.rho.copy(), self.r1, self.r2,
                              self.rate, self.pr, self.feasible, self.scheme, dict(self.notes))


class LinkModel:
    """Flat arrays for one (effective channel, config) pair.

    ``fsq`` already includes the harvest efficiency and is zero when
    self-interference harvesting is disabled; ``harv`` is ``eta*lambda_h``.
    """

    def __init__(self, eff: EffectiveChannel, cfg: SystemConfig):
        self.eff = eff
        self.cfg = cfg
        self.k1, self.k2, self.nr = eff.k1, eff.k2, eff.nr
        self.lam_h = np.asarray(eff.lambda_h, dtype=float)
        self.lam_g = np.asarray(eff.lambda_g, dtype=float)
        self.harv = cfg.eta * self.lam_h
        si_on = 1.0 if cfg.si_harvest_enabled else 0.0
        self.fsq = si_on * cfg.eta * np.asarray(eff.si_gain, dtype=float)
        # CSIR: relay spreads power over all nr transmit dimensions
        self.fsq_rows = si_on * cfg.eta * np.asarray(eff.f_tilde_sq, dtype=float).sum(axis=1)
        self.noise_r = cfg.noise_relay
        self.noise_d = cfg.sigma_d2
        self.ps = cfg.ps_watts
        self.pic = cfg.p_ic_watts
        self.eps = cfg.epsilon_boundary

    # -- rates and power ---------------------------------------------------
    def r1_nats(self, p, rho) -> float:
        return float(np.sum(np.log1p((1.0 - rho[: self.k1]) * p * self.lam_h / self.noise_r)))

    def r2_nats(self, q) -> float:
        return float(np.sum(np.log1p(q * self.lam_g / self.noise_d)))

    def si_incident(self, q) -> np.ndarray:
        """Harvestable SI power arriving on each receive beam (length nr)."""
        return self.fsq @ q

    def recycle_coeff(self, rho) -> np.ndarray:
        """``1 - sum_k rho_k |Ft_kj|^2`` per active transmit beam."""
        return 1.0 - rho @ self.fsq

    def source_harvest(self, p, rho) -> float:
        return float(np.dot(self.harv, p * rho[: self.k1]))

    def relay_power(self, p, q, rho) -> float:
        return self.source_harvest(p, rho) + float(np.dot(rho, self.si_incident(q))) - self.pic

    def max_source_harvest(self, scheme: str = "nonuniform") -> float:
        """Largest source-side harvest over the feasible set of ``scheme``."""
        if scheme == "csir":
            return (1.0 - self.eps) * float(self.harv.sum()) * self.ps / self.cfg.ns
        return (1.0 - self.eps) * float(self.harv.max(initial=0.0)) * self.ps

    def runaway(self) -> bool:
        """True if some transmit beam could recycle all of its own power."""
        if self.k2 == 0:
            return False
        return bool(np.any(1.0 - (1.0 - self.eps) * self.fsq.sum(axis=0) <= 0.0))


def _model(eff, cfg) -> LinkModel:
    return eff if isinstance(eff, LinkModel) else LinkModel(eff, cfg)


def rates_and_power(eff: EffectiveChannel, cfg: SystemConfig, p, q, rho) -> tuple[float, float, float]:
    """First-hop rate, second-hop rate (bits/s/Hz) and relay transmit power (W)."""
    m = _model(eff, cfg)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    rho = np.asarray(rho, dtype=float)
    return m.r1_nats(p, rho) / LN2, m.r2_nats(q) / LN2, m.relay_power(p, q, rho)


def _check_alpha(alpha: float) -> None:
    if alpha < 0.0:
        raise InadmissibleDual("alpha < 0", [-1.0, 0.0, 0.0])
    if alpha > 1.0:
        raise InadmissibleDual("alpha > 1", [1.0, 0.0, 0.0])


# -- coordinate updates ------------------------------------------------------

def _rho_closed_form(m: LinkModel, alpha: float, mu: float, p, s) -> np.ndarray:
    """Per-beam splitting ratio maximizing the Lagrangian for fixed powers.

    ``p`` is the source power per eigenmode, ``s`` the harvestable SI power
    arriving on each of the nr receive beams.
    """
    lo, hi = m.eps, 1.0 - m.eps
    rho = np.full(m.nr, hi)
    sig = p * m.lam_h
    value_rate = m.harv * p + s[: m.k1]
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = 1.0 + m.noise_r / sig - alpha / (mu * value_rate)
    # unpowered beam: only the SI term depends on rho, and it rewards harvesting
    raw = np.where(sig > 0.0, raw, np.inf)
    # nothing to harvest on a powered beam: all of it to the decoder
    raw = np.where((sig > 0.0) & ~(mu * value_rate > 0.0), -np.inf, raw)
    rho[: m.k1] = np.clip(raw, lo, hi)
    return rho


def _rho_nonuniform(m: LinkModel, alpha: float, mu: float, p, q) -> np.ndarray:
    return _rho_closed_form(m, alpha, mu, p, m.si_incident(q))


def _p_update(m: LinkModel, alpha: float, nu: float, mu: float, rho) -> np.ndarray:
    r = rho[: m.k1]
    denom = nu - mu * m.harv * r
    bad = np.flatnonzero(~(denom > 0.0))
    if bad.size:
        i = int(bad[0])
        raise InadmissibleDual(
            f"nu <= mu*lambda*rho on eigenmode {i}", [0.0, -1.0, float(m.harv[i] * r[i])])
    p = alpha / denom - m.noise_r / (m.lam_h * (1.0 - r))
    return np.maximum(p, 0.0)


def _q_update(m: LinkModel, alpha: float, mu: float, rho) -> np.ndarray:
    c = m.recycle_coeff(rho)
    if np.any(c <= 0.0):
        raise RunawayRecycling("SI recycling coefficient is not positive")
    if alpha >= 1.0:
        return np.zeros(m.k2)
    if not mu > 0.0:
        raise InadmissibleDual("mu must be positive while alpha < 1", [0.0, 0.0, -1.0])
    q = (1.0 - alpha) / (mu * c) - m.noise_d / m.lam_g
    return np.maximum(q, 0.0)


def bisect_root(fn, lo: float, hi: float, xtol: float = 0.0, maxiter: int = 200) -> float:
    """Root of an increasing function on ``[lo, hi]`` with ``fn(lo) < 0 < fn(hi)``.

    Runs until the bracket is narrower than ``xtol`` or stops shrinking in
    floating point, so ``xtol=0`` means "to machine precision".
    """
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol:
            break
        if fn(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def uniform_rho_equation(m: LinkModel, alpha: float, mu: float, p, q):
    """Return ``(f, c)``: the increasing function ``f(rho)`` and target ``c``.

    A scalar splitting ratio is Lagrangian-stationary where ``f(rho) = c``.
    """
    sig = p * m.lam_h
    c = mu * (float(np.dot(m.harv, p)) + float(m.si_incident(q).sum()))

    def f(rho: float) -> float:
        return float(np.sum(alpha * sig / (m.noise_r + (1.0 - rho) * sig)))

    return f, c


def _rho_uniform(m: LinkModel, alpha: float, mu: float, p, q) -> float:
    lo, hi = m.eps, 1.0 - m.eps
    f, c = uniform_rho_equation(m, alpha, mu, p, q)
    g_lo, g_hi = f(lo) - c, f(hi) - c
    if g_lo < 0.0 < g_hi:
        return bisect_root(lambda r: f(r) - c, lo, hi, xtol=1e-15)
    # no sign change: keep the endpoint with the larger rho-dependent Lagrangian
    sig = p * m.lam_h

    def part(r: float) -> float:
        return alpha * float(np.sum(np.log1p((1.0 - r) * sig / m.noise_r))) + r * c

    return lo if part(lo) >= part(hi) else hi


def _finish(m: LinkModel, p, q, rho, scheme: str) -> PrimalSolution:
    sol = PrimalSolution(p=p, q=q, rho=rho, scheme=scheme)
    sol.r1 = m.r1_nats(p, rho) / LN2
    sol.r2 = m.r2_nats(q) / LN2
    sol.pr = m.relay_power(p, q, rho)
    sol.rate = min(sol.r1, sol.r2)
    return sol


def primal_update_nonuniform(dual: DualPoint, eff, cfg, prev: PrimalSolution) -> PrimalSolution:
    """One pass rho -> p -> q of closed-form coordinate maximization.

    ``rho`` uses the previous ``p`` and ``q``; ``p`` and ``q`` then use the
    new ``rho``.  Raises :class:`InadmissibleDual` if the Lagrangian is
    unbounded in some coordinate at ``dual``.
    """
    m = _model(eff, cfg)
    _check_alpha(dual.alpha)
    rho = _rho_nonuniform(m, dual.alpha, dual.mu, prev.p, prev.q)
    p = _p_update(m, dual.alpha, dual.nu, dual.mu, rho)
    q = _q_update(m, dual.alpha, dual.mu, rho)
    return _finish(m, p, q, rho, "nonuniform")


def primal_update_uniform(dual: DualPoint, eff, cfg, prev: PrimalSolution) -> PrimalSolution:
    """Same as the non-uniform pass with one splitting ratio shared by all beams."""
    m = _model(eff, cfg)
    _check_alpha(dual.alpha)
    r = _rho_uniform(m, dual.alpha, dual.mu, prev.p, prev.q)
    rho = np.full(m.nr, r)
    p = _p_update(m, dual.alpha, dual.nu, dual.mu, rho)
    q = _q_update(m, dual.alpha, dual.mu, rho)
    return _finish(m, p, q, rho, "uniform")


# -- fixed-rho completion ----------------------------------------------------

def waterfill(gains, budget: float) -> np.ndarray:
    """Capacity-maximizing split of ``budget`` over parallel channels with SNR gains ``gains``."""
    gains = np.asarray(gains, dtype=float)
    out = np.zeros_like(gains)
    if budget <= 0.0 or gains.size == 0:
        return out
    order = np.argsort(gains)[::-1]
    inv = 1.0 / gains[order]
    csum = np.cumsum(inv)
    n = np.arange(1, gains.size + 1)
    level = (budget + csum) / n
    active = int(np.flatnonzero(level > inv)[-1]) + 1
    out[order[:active]] = level[active - 1] - inv[:active]
    return out


def _frontier_p(m: LinkModel, rho, theta: float) -> np.ndarray:
    """Source powers maximizing ``harvest + theta*R1`` with the full budget spent.

    Stationarity gives ``p_i = theta/(kappa - a_i) - 1/b_i``; ``kappa`` is
    found by bisection on its offset above ``max a_i`` so that
    ``sum p = Ps``.
    """
    r = rho[: m.k1]
    a = m.harv * r
    b = (1.0 - r) * m.lam_h / m.noise_r
    top = int(np.argmax(a))
    p = np.zeros(m.k1)
    if theta <= 0.0:
        p[top] = m.ps
        return p
    gap = a[top] - a

    def total(delta: float) -> float:
        return float(np.sum(np.maximum(theta / (delta + gap) - 1.0 / b, 0.0)))

    # total() is convex and decreasing in delta, so Newton started left of
    # the root climbs to it monotonically.
    delta = theta * float(b.max())
    while total(delta) < m.ps and delta > 1e-300:
        delta *= 1e-3
    for _ in range(100):
        x = theta / (delta + gap)
        on = x > 1.0 / b
        excess = float(np.sum(x[on] - 1.0 / b[on])) - m.ps
        slope = float(np.sum(x[on] ** 2)) / theta
        if excess <= 0.0 or slope <= 0.0:
            break
        step = excess / slope
        delta += step
        if step <= 1e-15 * delta:
            break
    hi = delta
    p = np.maximum(theta / (hi + gap) - 1.0 / b, 0.0)
    s = p.sum()
    if s > 0.0:
        p *= m.ps / s
    else:
        p[top] = m.ps
    return p


def allocate_fixed_rho(m: LinkModel, rho, scheme: str = "nonuniform") -> PrimalSolution:
    """Best source/relay powers for given splitting ratios.

    For fixed ``rho`` the problem is convex: walk the trade-off between
    harvested power and first-hop rate (parametrized by the rate weight
    ``theta``) and stop where the first-hop rate meets the second-hop rate
    the harvested budget can buy by water-filling.
    """
    rho = np.asarray(rho, dtype=float)
    c = m.recycle_coeff(rho)
    if np.any(c <= 0.0):
        raise RunawayRecycling("SI recycling coefficient is not positive")
    gains = m.lam_g / m.noise_d / c

    def evaluate(theta: float):
        p = _frontier_p(m, rho, theta)
        budget = m.source_harvest(p, rho) - m.pic
        y = waterfill(gains, budget)
        return p, y / c, m.r1_nats(p, rho), m.r2_nats(y / c)

    p, q, r1, r2 = evaluate(0.0)
    if r1 < r2:
        # r1 - r2 increases with theta; bracket the crossing in log(theta)
        lo = hi = -70.0
        while hi < 70.0:
            p, q, r1, r2 = evaluate(math.exp(hi))
            if r1 >= r2:
                break
            lo, hi = hi, hi + 7.0
        if r1 >= r2 and hi > lo:
            def crossing(t: float) -> float:
                _, _, a1, a2 = evaluate(math.exp(t))
                return a1 - a2
            t = brentq(crossing, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)
            cand = [evaluate(math.exp(x)) for x in (t, min(t + 1e-12, hi))]
            p, q, r1, r2 = max(cand, key=lambda c4: min(c4[2], c4[3]))
    sol = _finish(m, p, q, rho, scheme)
    sol.feasible = sol.pr >= 0.0 and m.source_harvest(p, rho) > m.pic
    if not sol.feasible:
        sol.rate = 0.0
    return sol


# -- CSIR-only ---------------------------------------------------------------

def csir_source_power(m: LinkModel) -> np.ndarray:
    return np.full(m.k1, m.ps / m.cfg.ns)


def csir_recycle(m: LinkModel, rho) -> float:
    """``1 - (1/nr) sum_k rho_k sum_i |Ft_ki|^2`` for isotropic relay transmission."""
    return 1.0 - float(np.dot(rho, m.fsq_rows)) / m.nr


def csir_relay_power(m: LinkModel, rho) -> float:
    """Relay power at equality of the harvest constraint (self-consistent recycling)."""
    d = csir_recycle(m, rho)
    if d <= 0.0:
        raise RunawayRecycling("isotropic SI recycling coefficient is not positive")
    p = csir_source_power(m)
    return (m.source_harvest(p, rho) - m.pic) / d


def csir_rates(m: LinkModel, rho, pr: float) -> tuple[float, float]:
    """Hop rates in nats for equal-power transmission at both nodes."""
    p = csir_source_power(m)
    r1 = m.r1_nats(p, rho)
    r2 = float(np.sum(np.log1p(max(pr, 0.0) / m.nr * m.lam_g / m.noise_d)))
    return r1, r2


def _rho_csir(m: LinkModel, alpha: float, mu: float, pr: float) -> np.ndarray:
    s = max(pr, 0.0) / m.nr * m.fsq_rows
    return _rho_closed_form(m, alpha, mu, csir_source_power(m), s)


def _pr_csir(m: LinkModel, alpha: float, mu: float, rho) -> float:
    """Relay power maximizing the CSIR Lagrangian for fixed rho."""
    d = csir_recycle(m, rho)
    if d <= 0.0:
        raise RunawayRecycling("isotropic SI recycling coefficient is not positive")
    if alpha >= 1.0:
        return 0.0
    if not mu > 0.0:
        raise InadmissibleDual("mu must be positive while alpha < 1", [0.0, 0.0, -1.0])
    gain = m.lam_g / m.nr

    def slope(pr: float) -> float:
        return (1.0 - alpha) * float(np.sum(gain / (m.noise_d + pr * gain))) - mu * d

    if slope(0.0) <= 0.0:
        return 0.0
    hi = (1.0 - alpha) * m.k2 / (mu * d)
    return bisect_root(lambda x: -slope(x), 0.0, hi)


def primal_update_csir(dual: DualPoint, eff, cfg, prev_pr: float | None = None) -> PrimalSolution:
    """Closed-form splitting ratios with equal power at source and relay.

    ``rho`` is computed against the relay power ``prev_pr`` (defaults to the
    self-consistent power at ``rho = 1 - eps``); the returned solution then
    carries the Lagrangian-maximizing relay power for that ``rho`` in
    ``notes['pr_lagrangian']`` and the self-consistent one in ``pr``.
    """
    m = _model(eff, cfg)
    _check_alpha(dual.alpha)
    if prev_pr is None:
        prev_pr = max(csir_relay_power(m, np.full(m.nr, 1.0 - m.eps)), 0.0)
    rho = _rho_csir(m, dual.alpha, dual.mu, prev_pr)
    pr_l = _pr_csir(m, dual.alpha, dual.mu, rho)
    return finish_csir(m, rho, pr_lagrangian=pr_l)


def finish_csir(m: LinkModel, rho, pr_lagrangian: float | None = None) -> PrimalSolution:
    p = csir_source_power(m)
    pr = csir_relay_power(m, rho)
    r1, r2 = csir_rates(m, rho, pr)
    sol = PrimalSolution(p=p, q=np.full(m.k2, max(pr, 0.0) / m.nr), rho=rho, scheme="csir")
    sol.r1, sol.r2, sol.pr = r1 / LN2, r2 / LN2, max(pr, 0.0)
    sol.feasible = pr > 0.0
    sol.rate = min(sol.r1, sol.r2) if sol.feasible else 0.0
    if pr_lagrangian is not None:
        sol.notes["pr_lagrangian"] = pr_lagrangian
    return sol


# -- dual function -----------------------------------------------------------

def subgradients(primal: PrimalSolution, eff, cfg) -> tuple[float, float, float]:
    """Constraint residuals at ``primal``: ``(R1 - R2, sum p - Ps, harvest residual)``.

    The first entry is in nats.  The harvest residual includes the
    cancellation draw.  As a subgradient of the dual function (which is
    minimized) the last two entries enter with a minus sign; see
    :func:`dual_subgradient`.  For the CSIR scheme the middle entry is 0 and
    the residual uses the Lagrangian relay power.
    """
    m = _model(eff, cfg)
    if primal.scheme == "csir":
        pr = primal.notes.get("pr_lagrangian", primal.pr)
        r1, r2 = csir_rates(m, primal.rho, pr)
        resid = pr * csir_recycle(m, primal.rho) - (m.source_harvest(primal.p, primal.rho) - m.pic)
        return r1 - r2, 0.0, resid
    d_alpha = m.r1_nats(primal.p, primal.rho) - m.r2_nats(primal.q)
    d_nu = float(primal.p.sum()) - m.ps
    d_mu = (float(np.dot(primal.q, m.recycle_coeff(primal.rho)))
            - m.source_harvest(primal.p, primal.rho) + m.pic)
    return d_alpha, d_nu, d_mu


def dual_subgradient(primal: PrimalSolution, eff, cfg) -> np.ndarray:
    """Subgradient of the dual function in ``(alpha, nu, mu)``."""
    d_alpha, d_nu, d_mu = subgradients(primal, eff, cfg)
    return np.array([d_alpha, -d_nu, -d_mu])


def lagrangian(dual: DualPoint, primal: PrimalSolution, eff, cfg) -> float:
    """Lagrangian value (nats) at the given primal and dual points."""
    m = _model(eff, cfg)
    d_alpha, d_nu, d_mu = subgradients(primal, eff, cfg)
    if primal.scheme == "csir":
        pr = primal.notes.get("pr_lagrangian", primal.pr)
        r1, r2 = csir_rates(m, primal.rho, pr)
    else:
        r1, r2 = m.r1_nats(primal.p, primal.rho), m.r2_nats(primal.q)
    return dual.alpha * r1 + (1.0 - dual.alpha) * r2 - dual.nu * d_nu - dual.mu * d_mu


def dual_value(dual: DualPoint, primal: PrimalSolution, eff, cfg) -> float:
    """Dual function value (nats), given the Lagrangian maximizer ``primal``."""
    return lagrangian(dual, primal, eff, cfg)


# -- proportional residual self-interference ----------------------------------

def rsi_fixed_point(solve_fn, cfg: SystemConfig, damping: float = 0.5, rtol: float = 1e-6,
                    max_iterations: int = 50) -> PrimalSolution:
    """Solve with ``sigma_f2 = rsi_alpha * P_r**rsi_beta`` made self-consistent.

    ``solve_fn(cfg)`` returns a :class:`PrimalSolution` (or a tuple starting
    with one) for a constant residual-SI floor.  The floor is moved halfway
    towards ``rsi_alpha * P_r**rsi_beta`` after each solve until the relay
    power settles.  The result's notes carry ``rsi_converged``,
    ``rsi_iterations``, ``sigma_f2`` and the summed solver ``iterations``.
    """
    if cfg.rsi_mode != "proportional":
        raise ValueError("rsi_fixed_point needs rsi_mode='proportional'")
    sigma = 0.0
    pr_prev = None
    sol = None
    converged = False
    total_iterations = 0
    for it in range(1, max_iterations + 1):
        out = solve_fn(cfg.replace(sigma_f2=sigma))
        sol, extra = (out[0], out[1:]) if isinstance(out, tuple) else (out, ())
        if extra and hasattr(extra[0], "iterations"):
            total_iterations += extra[0].iterations
        pr = max(sol.pr, 0.0) if sol.rate > 0.0 else 0.0
        target = cfg.rsi_alpha * pr ** cfg.rsi_beta if pr > 0.0 else 0.0
        settled = pr_prev is not None and abs(pr - pr_prev) <= rtol * max(pr, 1e-12)
        if target == sigma or settled:
            converged = True
            break
        pr_prev = pr
        sigma = (1.0 - damping) * sigma + damping * target
    sol.notes.update(rsi_converged=converged, rsi_iterations=it, sigma_f2=sigma,
                     iterations=total_iterations)
    return sol
