"""Joint power allocation and power splitting for a self-sustained full-duplex MIMO relay."""

from .channel import (
    ChannelRealization,
    EffectiveChannel,
    decompose,
    generate_channels,
    matrix_rates_and_power,
    reconstruct_covariances,
    split_seed,
)
from .config import ConfigError, SystemConfig, load_config, parse_config_text, with_cancellation
from .ellipsoid import EllipsoidState, SolveReport, ellipsoid_step, solve
from .experiments import SweepRecord, SweepSpec, run_scheme, run_sweep
from .oracle import OracleConfig, OracleRefused, oracle_solve
from .solver import (
    DualPoint,
    LinkModel,
    PrimalSolution,
    allocate_fixed_rho,
    dual_value,
    primal_update_csir,
    primal_update_nonuniform,
    primal_update_uniform,
    rsi_fixed_point,
    subgradients,
)

__all__ = [
    "ChannelRealization", "ConfigError", "DualPoint", "EffectiveChannel", "EllipsoidState",
    "LinkModel", "OracleConfig", "OracleRefused", "PrimalSolution", "SolveReport", "SweepRecord", "SweepSpec",
    "SystemConfig", "allocate_fixed_rho", "decompose", "dual_value", "ellipsoid_step", "generate_channels",
    "load_config", "matrix_rates_and_power", "oracle_solve", "parse_config_text",
    "primal_update_csir", "primal_update_nonuniform", "primal_update_uniform",
    "reconstruct_covariances", "rsi_fixed_point", "run_scheme", "run_sweep", "solve",
    "split_seed", "subgradients", "with_cancellation",
]
