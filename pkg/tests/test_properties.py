"""Property-based checks on the scalar building blocks."""

import numpy as np
from conftest import default_instance
from hypothesis import given, settings
from hypothesis import strategies as st

from fdrelay.solver import (
    DualPoint,
    LinkModel,
    PrimalSolution,
    _p_update,
    _q_update,
    _rho_closed_form,
    lagrangian,
    waterfill,
)

gains = st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=6)
seeds = st.integers(0, 40)
units = st.floats(0.02, 0.98)


@settings(max_examples=200, deadline=None)
@given(gains, st.floats(1e-4, 1e2))
def test_waterfill_spends_budget_at_one_level(g, budget):
    g = np.array(g)
    x = waterfill(g, budget)
    assert np.all(x >= 0.0)
    assert np.isclose(x.sum(), budget, rtol=1e-10)
    on = x > 0
    levels = x[on] + 1.0 / g[on]
    assert np.ptp(levels) <= 1e-9 * levels.max()
    # switched-off channels sit above the water
    assert np.all(1.0 / g[~on] >= levels.max() * (1 - 1e-12))


@settings(max_examples=200, deadline=None)
@given(gains, st.floats(1e-4, 1e2), st.floats(0.0, 1.0))
def test_waterfill_beats_other_splits(g, budget, mix):
    g = np.array(g)
    x = waterfill(g, budget)
    other = mix * np.full(g.size, budget / g.size) + (1.0 - mix) * x
    assert np.sum(np.log1p(g * x)) >= np.sum(np.log1p(g * other)) - 1e-12


_MODELS = {}


def _model(seed):
    if seed not in _MODELS:
        cfg, eff = default_instance(seed)
        _MODELS[seed] = (LinkModel(eff, cfg), cfg, eff)
    return _MODELS[seed]


@settings(max_examples=100, deadline=None)
@given(seeds, units, st.floats(1e-3, 1e4), st.floats(0.0, 1.0))
def test_rho_update_is_clamped(seed, alpha, mu, qscale):
    m, _, _ = _model(seed)
    p = np.full(m.k1, m.ps / m.k1)
    s = m.si_incident(np.full(m.k2, qscale))
    rho = _rho_closed_form(m, alpha, mu, p, s)
    assert np.all(rho >= m.eps) and np.all(rho <= 1.0 - m.eps)


@settings(max_examples=100, deadline=None)
@given(seeds, units, units, st.floats(0.1, 10.0), st.lists(units, min_size=4, max_size=4))
def test_power_updates_maximize_the_lagrangian(seed, alpha, r, mu_scale, mix):
    m, cfg, eff = _model(seed)
    rho = np.full(m.nr, r)
    a_max = float(np.max(m.harv * rho[: m.k1]))
    mu = mu_scale / max(a_max, 1e-12) * 1e-3
    nu = (1.0 - m.eps) * mu * a_max + 1.0
    dual = DualPoint(alpha, nu, mu)
    p = _p_update(m, alpha, nu, mu, rho)
    q = _q_update(m, alpha, mu, rho)
    best = lagrangian(dual, PrimalSolution(p, q, rho), eff, cfg)
    mix = np.array(mix)
    for t in mix:
        p2 = t * p + (1 - t) * np.full(m.k1, mix[0] * m.ps)
        q2 = t * q + (1 - t) * np.full(m.k2, mix[1] * 0.1)
        assert lagrangian(dual, PrimalSolution(p2, q, rho), eff, cfg) <= best + 1e-9 * abs(best) + 1e-12
        assert lagrangian(dual, PrimalSolution(p, q2, rho), eff, cfg) <= best + 1e-9 * abs(best) + 1e-12


@settings(max_examples=100, deadline=None)
@given(seeds, units, st.floats(0.0, 10.0), st.floats(0.0, 1e3), units, units)
def test_lagrangian_bounds_the_rate_of_feasible_points(seed, alpha, nu, mu, r, share):
    m, cfg, eff = _model(seed)
    rho = np.full(m.nr, r)
    p = np.full(m.k1, share * m.ps / m.k1)
    budget = m.source_harvest(p, rho) - m.pic
    coeff = m.recycle_coeff(rho)
    q = np.zeros(m.k2) if budget <= 0 else np.full(m.k2, share * budget / coeff.sum())
    sol = PrimalSolution(p, q, rho)
    value = lagrangian(DualPoint(alpha, nu, mu), sol, eff, cfg)
    if budget > 0:
        assert value >= min(m.r1_nats(p, rho), m.r2_nats(q)) - 1e-12
