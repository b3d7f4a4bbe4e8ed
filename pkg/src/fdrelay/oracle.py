"""Brute-force reference optimizer for desk-scale instances.

Grid search over the splitting ratios, with the power allocation at each
grid point solved by a direct primal search: golden section over the split
of source power between the (at most two) source eigenmodes, and the relay
powers by water-filling the harvested budget.  Shares no code with the
primal-dual solver beyond the channel reduction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import EffectiveChannel
from .config import SystemConfig

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_SHRINK = 0.2


class OracleRefused(ValueError):
    """Instance too large for exhaustive search."""


@dataclass(frozen=True)
class OracleConfig:
    grid_points_per_dim: int = 25
    refine_rounds: int = 3
    max_dims: int = 6
    golden_iterations: int = 80

    def __post_init__(self):
        if self.grid_points_per_dim < 5:
            raise ValueError("grid_points_per_dim must be >= 5")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be >= 0")


@dataclass(frozen=True)
class OracleResult:
    rate: float  # bits/s/Hz
    p: np.ndarray
    q: np.ndarray
    rho: np.ndarray
    history: tuple = ()  # incumbent rate after the coarse grid and each refinement

    def __iter__(self):
        return iter((self.rate, self.p, self.q, self.rho))


def _waterfill_rows(gains: np.ndarray, budget: np.ndarray) -> np.ndarray:
    """Row-wise water-filling: ``gains`` (n, k), ``budget`` (n,) -> powers (n, k)."""
    n, k = gains.shape
    out = np.zeros((n, k))
    ok = budget > 0.0
    if not np.any(ok) or k == 0:
        return out
    g = gains[ok]
    order = np.argsort(-g, axis=1)
    inv = 1.0 / np.take_along_axis(g, order, axis=1)
    csum = np.cumsum(inv, axis=1)
    levels = (budget[ok, None] + csum) / np.arange(1, k + 1)
    # active set is a prefix; the last prefix whose level clears its floor
    valid = levels > inv
    count = k - np.argmax(valid[:, ::-1], axis=1)
    level = np.take_along_axis(levels, (count - 1)[:, None], axis=1)
    powers = np.where(np.arange(k) < count[:, None], level - inv, 0.0)
    sub = np.zeros_like(g)
    np.put_along_axis(sub, order, powers, axis=1)
    out[ok] = sub
    return out


class _Instance:
    def __init__(self, eff: EffectiveChannel, cfg: SystemConfig):
        self.lam_h = np.asarray(eff.lambda_h, dtype=float)
        self.lam_g = np.asarray(eff.lambda_g, dtype=float)
        self.k1, self.k2, self.nr = eff.k1, eff.k2, eff.nr
        gain = np.asarray(eff.f_tilde_sq, dtype=float)[:, : self.k2]
        self.si = cfg.eta * gain if cfg.si_harvest_enabled else np.zeros_like(gain)
        self.si_rf = gain.sum(axis=0)
        self.si_all = (cfg.eta * np.asarray(eff.f_tilde_sq, dtype=float).sum(axis=1)
                       if cfg.si_harvest_enabled else np.zeros(self.nr))
        self.eta = cfg.eta
        self.ps = cfg.ps_watts
        self.pic = cfg.p_ic_watts
        self.n_r = cfg.sigma_p2 + cfg.sigma_f2
        self.n_d = cfg.sigma_d2
        self.sens = cfg.eh_sensitivity_watts
        self.ns = cfg.ns

    def evaluate(self, rho: np.ndarray, p: np.ndarray, search: bool = False):
        """Best min-rate (bits) for rows of ``rho`` (n, nr) and ``p`` (n, k1).

        With ``search`` set, rows without a usable relay budget score the
        (negative) budget instead of 0 so the objective has no flat region.
        """
        r = rho[:, : self.k1]
        snr1 = (1.0 - r) * self.lam_h * p / self.n_r
        r1 = np.log2(1.0 + snr1).sum(axis=1)
        coeff = 1.0 - rho @ self.si  # (n, k2)
        budget = self.eta * (self.lam_h * r * p).sum(axis=1) - self.pic
        runaway = np.any(coeff <= 0.0, axis=1)
        safe = np.where(coeff > 0.0, coeff, 1.0)
        y = _waterfill_rows(self.lam_g / self.n_d / safe, np.where(runaway, 0.0, budget))
        q = y / safe
        r2 = np.log2(1.0 + q * self.lam_g / self.n_d).sum(axis=1)
        rate = np.minimum(r1, r2)
        rf = (self.lam_h * p).sum(axis=1) + q @ self.si_rf
        dead = runaway | (budget <= 0.0) | (rf < self.sens)
        if search:
            return np.where(budget <= 0.0, budget, np.where(dead, 0.0, rate)), q
        return np.where(dead, 0.0, rate), q

    def best_split(self, rho: np.ndarray, iterations: int):
        """Golden-section over the source power split for every row of ``rho``."""
        n = rho.shape[0]
        if self.k1 == 1:
            p = np.full((n, 1), self.ps)
            rate, q = self.evaluate(rho, p)
            return rate, p, q

        def split(t):
            return np.stack([t, self.ps - t], axis=1)

        lo = np.zeros(n)
        hi = np.full(n, self.ps)
        a = hi - _INV_PHI * (hi - lo)
        b = lo + _INV_PHI * (hi - lo)
        fa = self.evaluate(rho, split(a), True)[0]
        fb = self.evaluate(rho, split(b), True)[0]
        for _ in range(iterations):
            left = fa >= fb
            hi = np.where(left, b, hi)
            lo = np.where(left, lo, a)
            a = hi - _INV_PHI * (hi - lo)
            b = lo + _INV_PHI * (hi - lo)
            # both interior points are re-evaluated: cheap at desk scale
            fa = self.evaluate(rho, split(a), True)[0]
            fb = self.evaluate(rho, split(b), True)[0]
        # candidate set includes both endpoints: the optimum often sits on one
        cands = [a, b, np.zeros(n), np.full(n, self.ps)]
        best_rate = np.full(n, -np.inf)
        best_p = np.zeros((n, 2))
        best_q = np.zeros((n, self.k2))
        for t in cands:
            p = split(t)
            rate, q = self.evaluate(rho, p)
            better = rate > best_rate
            best_rate = np.where(better, rate, best_rate)
            best_p[better] = p[better]
            best_q[better] = q[better]
        return best_rate, best_p, best_q

    def csir(self, rho: np.ndarray):
        """Rates of the equal-power scheme for rows of ``rho``."""
        p_each = self.ps / self.ns
        r = rho[:, : self.k1]
        r1 = np.log2(1.0 + (1.0 - r) * self.lam_h * p_each / self.n_r).sum(axis=1)
        den = 1.0 - rho @ self.si_all / self.nr
        num = self.eta * (self.lam_h * r * p_each).sum(axis=1) - self.pic
        ok = (den > 0.0) & (num > 0.0)
        pr = np.where(ok, num / np.where(den > 0.0, den, 1.0), 0.0)
        r2 = np.log2(1.0 + pr[:, None] / self.nr * self.lam_g / self.n_d).sum(axis=1)
        return np.where(ok, np.minimum(r1, r2), 0.0), pr


def _grid(lo: np.ndarray, hi: np.ndarray, points: int) -> np.ndarray:
    axes = [np.linspace(a, b, points) for a, b in zip(lo, hi)]
    return np.array(list(itertools.product(*axes)))


def oracle_solve(eff: EffectiveChannel, cfg: SystemConfig, scheme: str = "nonuniform",
                 options: OracleConfig | None = None) -> OracleResult:
    """Exhaustive optimum of the min-hop rate for one realization.

    ``scheme`` is ``"nonuniform"`` (one ratio per receive beam), ``"uniform"``
    (one shared ratio) or ``"csir"`` (equal source and relay powers).
    """
    opts = options or OracleConfig()
    if scheme not in ("nonuniform", "uniform", "csir"):
        raise ValueError(f"unknown scheme {scheme!r}")
    dims = eff.k1 + eff.k2 + eff.nr
    if dims > opts.max_dims:
        raise OracleRefused(f"{dims} scalar variables exceed the oracle limit of {opts.max_dims}")
    inst = _Instance(eff, cfg)
    if eff.k1 == 0 or eff.k2 == 0:
        return OracleResult(0.0, np.zeros(eff.k1), np.zeros(eff.k2), np.full(eff.nr, cfg.epsilon_boundary))

    eps = cfg.epsilon_boundary
    free = 1 if scheme == "uniform" else eff.nr
    lo = np.full(free, eps)
    hi = np.full(free, 1.0 - eps)
    width = hi - lo
    center = None
    best = (-np.inf, None, None, None)
    history = []
    for rnd in range(opts.refine_rounds + 1):
        if center is not None:
            width = width * _SHRINK
            lo = np.maximum(center - width / 2.0, eps)
            hi = np.minimum(center + width / 2.0, 1.0 - eps)
        pts = _grid(lo, hi, opts.grid_points_per_dim)
        rho = np.repeat(pts, eff.nr, axis=1) if scheme == "uniform" else pts
        if scheme == "csir":
            rate, pr = inst.csir(rho)
            p = np.full((len(pts), eff.k1), cfg.ps_watts / cfg.ns)
            q = np.repeat(pr[:, None] / eff.nr, eff.k2, axis=1)
        else:
            rate, p, q = inst.best_split(rho, opts.golden_iterations)
        i = int(np.argmax(rate))
        if rate[i] > best[0]:
            best = (float(rate[i]), p[i].copy(), q[i].copy(), rho[i].copy())
        center = pts[i] if rate[i] >= best[0] else center
        history.append(best[0])
    rate, p, q, rho = best
    return OracleResult(max(rate, 0.0), p, q, rho, tuple(history))
