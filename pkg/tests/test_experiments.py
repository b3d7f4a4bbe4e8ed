import math

import numpy as np
import pytest

from fdrelay.channel import decompose, generate_channels, split_seed
from fdrelay.config import ConfigError, SystemConfig, dbm_to_watts
from fdrelay.ellipsoid import solve
from fdrelay.experiments import (
    SCHEMES,
    SweepRow,
    SweepSpec,
    aggregate,
    default_workers,
    run_scheme,
    run_sweep,
)

FAST = ("fd_nonuniform", "fd_no_si_harvest", "fd_csir", "half_duplex")


def test_spec_validation():
    base = SystemConfig()
    with pytest.raises(ConfigError):
        SweepSpec(base, "ps_dbm", (20.0,), ())
    with pytest.raises(ConfigError):
        SweepSpec(base, "ps_dbm", (20.0,), ("fd_magic",))
    with pytest.raises(ConfigError):
        SweepSpec(base, "bandwidth", (1.0,), ("fd_csir",))
    with pytest.raises(ConfigError):
        SweepSpec(base, "ps_dbm", (30.0, 20.0), ("fd_csir",))
    with pytest.raises(ConfigError):
        SweepSpec(base, "ps_dbm", (20.0,), ("fd_csir",), realizations=0)
    spec = SweepSpec(base, "d_sr", (2.0, 4.0), ("fd_csir",))
    assert spec.config_at(4.0).d_sr == 4.0
    assert spec.config_at(4.0).d_sd == base.d_sd


def test_single_realization_equals_direct_solve():
    base = SystemConfig()
    spec = SweepSpec(base, "ps_dbm", (35.0,), ("fd_nonuniform",), realizations=1, seed=4)
    row = run_sweep(spec, workers=1).rows[0]
    cfg = base.replace(ps_watts=dbm_to_watts(35.0))
    sol, report = solve(decompose(generate_channels(cfg, split_seed(4, 0))), cfg)
    assert row.seed == split_seed(4, 0)
    assert row.rate == sol.rate and row.pr == sol.pr
    assert row.iterations == report.iterations


def test_rows_are_ordered_and_deterministic():
    spec = SweepSpec(SystemConfig(), "ps_dbm", (25.0, 35.0), FAST, realizations=3, seed=1)
    a = run_sweep(spec, workers=1)
    b = run_sweep(spec, workers=1)
    assert a.rows == b.rows
    keys = [(r.axis_value, r.seed, FAST.index(r.scheme)) for r in a.rows]
    expected = [(v, split_seed(1, i), k) for v in (25.0, 35.0) for i in range(3)
                for k in range(len(FAST))]
    assert keys == expected


def test_worker_count_does_not_change_rows():
    spec = SweepSpec(SystemConfig(), "ps_dbm", (35.0,), ("fd_nonuniform", "fd_csir"),
                     realizations=3, seed=2)
    assert run_sweep(spec, workers=1).rows == run_sweep(spec, workers=2).rows


def test_paired_draws_across_axis_values():
    # same seed index, different source power: same small-scale fading
    base = SystemConfig()
    a = generate_channels(base.replace(ps_watts=dbm_to_watts(20.0)), split_seed(0, 2))
    b = generate_channels(base.replace(ps_watts=dbm_to_watts(40.0)), split_seed(0, 2))
    assert np.array_equal(a.h, b.h) and np.array_equal(a.g, b.g)


def test_no_si_channel_makes_si_harvest_irrelevant():
    cfg = SystemConfig()
    r = generate_channels(cfg, 6)
    r0 = type(r)(r.h, r.g, np.zeros_like(r.f), r.seed)
    a = run_scheme(r0, cfg, "fd_nonuniform")
    b = run_scheme(r0, cfg, "fd_no_si_harvest")
    assert a.rate == pytest.approx(b.rate, rel=1e-9, abs=1e-12)


def test_si_harvest_never_hurts():
    cfg = SystemConfig()
    for seed in range(4):
        r = generate_channels(cfg, seed)
        assert run_scheme(r, cfg, "fd_nonuniform").rate >= run_scheme(r, cfg, "fd_no_si_harvest").rate - 1e-6


def test_half_duplex_is_half_of_an_si_free_link():
    cfg = SystemConfig()
    r = generate_channels(cfg, 3)
    hd = run_scheme(r, cfg, "half_duplex")
    assert hd.notes["time_share"] == 0.5
    sol, _ = solve(decompose(r).without_si(), cfg.replace(sigma_f2=0.0, p_ic_watts=0.0))
    assert hd.rate == pytest.approx(0.5 * sol.rate, rel=1e-12)


@pytest.mark.slow
def test_hybrid_is_best_of_both():
    cfg = SystemConfig()
    r = generate_channels(cfg, 1)
    h = run_scheme(r, cfg, "fd_hybrid")
    a = run_scheme(r, cfg, "fd_nonuniform")
    p = run_scheme(r, cfg, "fd_passive")
    assert h.rate >= max(a.rate, p.rate) - 1e-12
    assert h.notes["hybrid_choice"] in ("active", "passive")
    assert "converged" in h.notes


def test_unknown_scheme():
    with pytest.raises(ValueError):
        run_scheme(generate_channels(SystemConfig(), 0), SystemConfig(), "fd_magic")
    assert len(SCHEMES) == 7


def test_aggregate_counts_failures_and_zeros():
    def row(rate, failed=False):
        return SweepRow(1, "fd_csir", 10.0, 2, 2, 2, 10.0, 2.0, rate, 0.0, 5, True, failed)

    rows = [row(0.0), row(2.0), row(4.0), row(math.nan, failed=True)]
    rec = aggregate(rows, 10.0, "fd_csir")
    assert rec.realizations == 3 and rec.failures == 1
    assert rec.mean_rate == pytest.approx(2.0)
    assert rec.zero_rate_fraction == pytest.approx(1.0 / 3.0)
    assert rec.rate_std_error == pytest.approx(2.0 / math.sqrt(3.0))
    empty = aggregate([row(math.nan, failed=True)], 10.0, "fd_csir")
    assert empty.realizations == 0 and math.isnan(empty.mean_rate)


def test_zero_power_sweep_gives_zero_rate():
    spec = SweepSpec(SystemConfig(ps_watts=0.0), "d_sr", (2.0,), ("fd_nonuniform", "half_duplex"),
                     realizations=2)
    res = run_sweep(spec, workers=1)
    assert all(r.rate == 0.0 for r in res.rows)
    assert all(rec.zero_rate_fraction == 1.0 for rec in res.records)


def test_workers_env(monkeypatch):
    monkeypatch.setenv("FDRELAY_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("FDRELAY_WORKERS", "many")
    with pytest.raises(ConfigError):
        default_workers()
    monkeypatch.delenv("FDRELAY_WORKERS")
    assert default_workers() == 1
