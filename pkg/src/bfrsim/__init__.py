"""Discrete-event simulator for Bloom filter-based routing in Named Data Networking."""
from .bloom import BloomFilter, BloomParams, derive_params, estimate_fpp
from .config import ConfigError, FailureSpec, ScenarioConfig, load_config
from .metrics import MetricsReport, export
from .names import ContentName, parse
from .scenario import build_network, run_config, run_scenario, run_sweep

__version__ = "0.1.0"

__all__ = [
    "BloomFilter",
    "BloomParams",
    "ConfigError",
    "ContentName",
    "FailureSpec",
    "MetricsReport",
    "ScenarioConfig",
    "build_network",
    "derive_params",
    "estimate_fpp",
    "export",
    "load_config",
    "parse",
    "run_config",
    "run_scenario",
    "run_sweep",
]
