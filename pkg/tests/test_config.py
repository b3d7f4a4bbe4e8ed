import math

import pytest

from fdrelay.config import (
    ConfigError,
    SystemConfig,
    dbm_to_watts,
    parse_config_text,
    rsi_noise_from_snr_loss,
    watts_to_dbm,
    with_cancellation,
)


def test_dbm_roundtrip():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(-100.0) == pytest.approx(1e-13)
    for w in (1e-9, 0.013, 3.0):
        assert dbm_to_watts(watts_to_dbm(w)) == pytest.approx(w, rel=1e-12)


def test_defaults_match_evaluation_setting():
    cfg = SystemConfig()
    assert (cfg.ns, cfg.nr, cfg.nd) == (2, 2, 2)
    assert cfg.ps_watts == pytest.approx(1.0)
    assert cfg.d_rd == pytest.approx(8.0)
    assert cfg.p_ic_watts == pytest.approx(13e-3)
    assert cfg.eh_sensitivity_watts == pytest.approx(1e-7)
    # 1 dB SNR loss: total relay noise is 10**0.1 times the thermal floor
    assert cfg.noise_relay / cfg.sigma_p2 == pytest.approx(10 ** 0.1)


def test_rsi_from_snr_loss_zero_db():
    assert rsi_noise_from_snr_loss(1e-13, 0.0) == 0.0


@pytest.mark.parametrize("kw,fieldname", [
    ({"ns": 0}, "ns"),
    ({"d_sr": 10.0}, "d_sr"),
    ({"gamma": 0.0}, "gamma"),
    ({"eta": 1.5}, "eta"),
    ({"ps_watts": -1.0}, "ps_watts"),
    ({"epsilon_boundary": 0.5}, "epsilon_boundary"),
    ({"rsi_mode": "linear"}, "rsi_mode"),
    ({"nr": 2.0}, "nr"),
])
def test_invalid_fields_rejected(kw, fieldname):
    with pytest.raises(ConfigError) as info:
        SystemConfig(**kw)
    assert info.value.field == fieldname


def test_with_cancellation():
    cfg = SystemConfig()
    passive = with_cancellation(cfg, "passive")
    assert passive.p_ic_watts == 0.0 and passive.rsi_mode == "proportional"
    active = with_cancellation(passive, "active")
    assert active.rsi_mode == "constant"
    assert with_cancellation(cfg, "hybrid").cancellation_mode == "hybrid"
    with pytest.raises(ConfigError):
        with_cancellation(cfg, "magic")


def test_parse_units_and_extras():
    text = "# scenario\nps_dbm = 35\np_ic_mw = 10  ; inline comment\nnr = 8\naxis = ps_dbm\nvalues = 25, 35\n"
    cfg, extra = parse_config_text(text)
    assert cfg.ps_watts == pytest.approx(dbm_to_watts(35.0))
    assert cfg.p_ic_watts == pytest.approx(0.01)
    assert cfg.nr == 8
    assert extra == {"axis": "ps_dbm", "values": "25, 35"}


def test_parse_noise_and_rsi():
    cfg, _ = parse_config_text("noise_dbm = -90\nrsi_db = 3\n")
    assert cfg.sigma_p2 == pytest.approx(1e-12)
    assert cfg.sigma_d2 == pytest.approx(1e-12)
    assert cfg.sigma_f2 == pytest.approx(1e-12 * (10 ** 0.3 - 1.0))


def test_parse_errors_carry_line_and_field():
    with pytest.raises(ConfigError) as info:
        parse_config_text("ns = 2\n\nbogus = 1\n")
    assert (info.value.field, info.value.line) == ("bogus", 3)
    with pytest.raises(ConfigError) as info:
        parse_config_text("ns = 2\nns = 3\n")
    assert info.value.line == 2
    with pytest.raises(ConfigError) as info:
        parse_config_text("nr = 2\ngamma = -1\n")
    assert (info.value.field, info.value.line) == ("gamma", 2)
    with pytest.raises(ConfigError):
        parse_config_text("just some words\n")


def test_boolean_parsing():
    cfg, _ = parse_config_text("si_harvest_enabled = off\n")
    assert cfg.si_harvest_enabled is False
    with pytest.raises(ConfigError):
        parse_config_text("si_harvest_enabled = maybe\n")


def test_infinite_k_factor_allowed():
    cfg, _ = parse_config_text("rician_k_db = inf\n")
    assert math.isinf(cfg.rician_k_db)
