"""Stacked-metasurface multiuser downlink: scenarios, rate models and three beamforming solvers."""

from .config import ConfigError, SystemConfig, desk_config, load_config
from .gmr_ao import solve_gmr
from .mr_admm import solve_mr
from .rates import RateReport, sinr_and_rates
from .scenario import ChannelSet, generate_channels

__all__ = [
    "ChannelSet",
    "ConfigError",
    "RateReport",
    "SystemConfig",
    "desk_config",
    "generate_channels",
    "load_config",
    "sinr_and_rates",
    "solve_gmr",
    "solve_mr",
]
__version__ = "0.1.0"
