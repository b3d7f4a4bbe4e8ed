"""Scenario parameters and the dB <-> linear boundary.

Everything inside the package works in linear units (watts, metres, plain
ratios).  dB/dBm quantities only appear in the config-file layer here.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

RSI_MODES = ("constant", "proportional")
CANCELLATION_MODES = ("active", "passive", "hybrid")


class ConfigError(ValueError):
    """Invalid scenario configuration.

    ``field`` names the offending key and ``line`` its 1-based line in the
    config file (``None`` when the config was not read from a file).
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1e3


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts * 1e3)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def rsi_noise_from_snr_loss(noise_watts: float, loss_db: float) -> float:
    """Baseband residual self-interference power that raises the noise floor by ``loss_db``."""
    return noise_watts * (db_to_linear(loss_db) - 1.0)


_NOISE = dbm_to_watts(-100.0)


@dataclass(frozen=True)
class SystemConfig:
    """All scenario parameters of the relay link, in linear units.

    Defaults reproduce the evaluation setting used throughout the package:
    2x2x2 antennas, 30 dBm source power, S-R 2 m / S-D 10 m with path-loss
    exponent 3.2, -100 dBm noise, 1 dB residual self-interference, 13 mW
    active-cancellation draw, Rician SI channel with K = 30 dB and
    gain -20 dB, -40 dBm harvester sensitivity.
    """

    ns: int = 2
    nr: int = 2
    nd: int = 2
    ps_watts: float = dbm_to_watts(30.0)
    d_sr: float = 2.0
    d_sd: float = 10.0
    gamma: float = 3.2
    sigma_p2: float = _NOISE
    sigma_d2: float = _NOISE
    sigma_f2: float = rsi_noise_from_snr_loss(_NOISE, 1.0)
    rsi_mode: str = "constant"
    rsi_alpha: float = 1e-4
    rsi_beta: float = 1.0
    p_ic_watts: float = 13e-3
    cancellation_mode: str = "active"
    eta: float = 1.0
    rician_k_db: float = 30.0
    omega_db: float = -20.0
    eh_sensitivity_watts: float = dbm_to_watts(-40.0)
    si_harvest_enabled: bool = True
    epsilon_boundary: float = 1e-3
    epsilon_precision: float = 1e-5
    max_iterations: int = 5000

    def __post_init__(self):
        self.validate()

    @property
    def d_rd(self) -> float:
        return self.d_sd - self.d_sr

    @property
    def noise_relay(self) -> float:
        """Total baseband noise at the relay decoder (thermal + residual SI)."""
        return self.sigma_p2 + self.sigma_f2

    def validate(self) -> None:
        for name in ("ns", "nr", "nd", "max_iterations"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"must be a positive integer, got {v!r}", name)
        if not 0.0 < self.d_sr < self.d_sd:
            raise ConfigError(f"need 0 < d_sr < d_sd, got d_sr={self.d_sr}, d_sd={self.d_sd}", "d_sr")
        if not self.gamma > 0.0:
            raise ConfigError("path-loss exponent must be positive", "gamma")
        for name in ("ps_watts", "sigma_p2", "sigma_d2", "sigma_f2", "p_ic_watts",
                     "eh_sensitivity_watts", "rsi_alpha", "rsi_beta"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ConfigError(f"must be finite and >= 0, got {v!r}", name)
        if self.sigma_p2 + self.sigma_f2 <= 0.0 or self.sigma_d2 <= 0.0:
            raise ConfigError("receiver noise must be positive", "sigma_p2")
        if self.rsi_mode not in RSI_MODES:
            raise ConfigError(f"must be one of {RSI_MODES}", "rsi_mode")
        if self.cancellation_mode not in CANCELLATION_MODES:
            raise ConfigError(f"must be one of {CANCELLATION_MODES}", "cancellation_mode")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError("harvest efficiency must lie in [0, 1]", "eta")
        if not 0.0 < self.epsilon_boundary < 0.5:
            raise ConfigError("must lie in (0, 0.5)", "epsilon_boundary")
        if not self.epsilon_precision > 0.0:
            raise ConfigError("must be positive", "epsilon_precision")
        if math.isnan(self.rician_k_db) or math.isnan(self.omega_db):
            raise ConfigError("must not be NaN", "rician_k_db")

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


def with_cancellation(cfg: SystemConfig, mode: str) -> SystemConfig:
    """Apply the parameter overrides that define a cancellation mode.

    ``active`` keeps the configured circuit draw and constant RSI floor;
    ``passive`` drops the circuit draw and makes RSI proportional to the
    relay power.  ``hybrid`` is a per-realization choice and is resolved by
    the experiment harness, so it leaves the parameters untouched.
    """
    if mode == "active":
        return cfg.replace(cancellation_mode="active", rsi_mode="constant")
    if mode == "passive":
        return cfg.replace(cancellation_mode="passive", p_ic_watts=0.0, rsi_mode="proportional")
    if mode == "hybrid":
        return cfg.replace(cancellation_mode="hybrid")
    raise ConfigError(f"unknown cancellation mode {mode!r}", "cancellation_mode")


# Config-file keys.  dB-valued keys are converted here and nowhere else.
_FILE_KEYS: dict[str, tuple[str, Any]] = {
    "ns": ("ns", int),
    "nr": ("nr", int),
    "nd": ("nd", int),
    "ps_dbm": ("ps_watts", lambda s: dbm_to_watts(float(s))),
    "ps_watts": ("ps_watts", float),
    "d_sr": ("d_sr", float),
    "d_sd": ("d_sd", float),
    "gamma": ("gamma", float),
    "sigma_p2": ("sigma_p2", float),
    "sigma_d2": ("sigma_d2", float),
    "sigma_f2": ("sigma_f2", float),
    "rsi_mode": ("rsi_mode", str),
    "rsi_alpha": ("rsi_alpha", float),
    "rsi_beta": ("rsi_beta", float),
    "p_ic_mw": ("p_ic_watts", lambda s: float(s) / 1e3),
    "p_ic_watts": ("p_ic_watts", float),
    "cancellation_mode": ("cancellation_mode", str),
    "eta": ("eta", float),
    "rician_k_db": ("rician_k_db", float),
    "omega_db": ("omega_db", float),
    "eh_sensitivity_dbm": ("eh_sensitivity_watts", lambda s: dbm_to_watts(float(s))),
    "eh_sensitivity_watts": ("eh_sensitivity_watts", float),
    "si_harvest_enabled": ("si_harvest_enabled", None),
    "epsilon_boundary": ("epsilon_boundary", float),
    "epsilon_precision": ("epsilon_precision", float),
    "max_iterations": ("max_iterations", int),
}

# Handled specially: noise floors and the RSI SNR loss interact.
_NOISE_KEYS = ("noise_dbm", "rsi_db")

# Experiment-level keys read by the sweep command, not by SystemConfig.
SWEEP_KEYS = ("axis", "values", "schemes", "realizations", "seed")


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config_text(text: str) -> tuple[SystemConfig, dict[str, str]]:
    """Parse a flat ``key = value`` document.

    Returns the validated config and the raw experiment-level entries
    (``axis``, ``values``, ...), which the caller interprets.
    Comments start with ``#`` or ``;``.  Unknown keys are an error.
    """
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] in "#;":
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", line=lineno)
        key = stripped.split("=", 1)[0].strip().lower()
        if key in lines:
            raise ConfigError("duplicate key", key, lineno)
        lines[key] = lineno

    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    entries = dict(parser["config"])

    kwargs: dict[str, Any] = {}
    extra: dict[str, str] = {}
    for key, value in entries.items():
        line = lines.get(key)
        if key in SWEEP_KEYS:
            extra[key] = value
            continue
        if key in _NOISE_KEYS:
            continue
        if key not in _FILE_KEYS:
            raise ConfigError("unknown key", key, line)
        target, conv = _FILE_KEYS[key]
        try:
            kwargs[target] = _parse_bool(value) if conv is None else conv(value)
        except ValueError as exc:
            raise ConfigError(str(exc), key, line) from exc

    try:
        if "noise_dbm" in entries:
            n = dbm_to_watts(float(entries["noise_dbm"]))
            kwargs.setdefault("sigma_p2", n)
            kwargs.setdefault("sigma_d2", n)
        if "rsi_db" in entries:
            if "sigma_f2" in kwargs:
                raise ConfigError("give either rsi_db or sigma_f2", "rsi_db", lines.get("rsi_db"))
            kwargs["sigma_f2"] = rsi_noise_from_snr_loss(
                kwargs.get("sigma_p2", _NOISE), float(entries["rsi_db"]))
        elif "sigma_f2" not in kwargs and "sigma_p2" in kwargs:
            kwargs["sigma_f2"] = rsi_noise_from_snr_loss(kwargs["sigma_p2"], 1.0)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "noise_dbm", lines.get("noise_dbm")) from exc

    try:
        cfg = SystemConfig(**kwargs)
    except ConfigError as exc:
        if exc.line is None and exc.field is not None:
            inverse = {v[0]: k for k, v in _FILE_KEYS.items()}
            key = inverse.get(exc.field, exc.field)
            line = lines.get(key) or lines.get(exc.field)
            raise ConfigError(str(exc).split(": ", 1)[-1], exc.field, line) from None
        raise
    return cfg, extra


def load_config(path: str | Path) -> tuple[SystemConfig, dict[str, str]]:
    return parse_config_text(Path(path).read_text())
