"""Exact expected delay and capacity of two-hop-relay MANETs, with a matching simulator."""

from .params import (ConfigError, NetworkParams, ParameterError, RunSettings, Config,
                     build_params, load_config)
from .probabilities import ProbabilityTable, StabilityError, compute_table
from .qbd import QbdSolution, capacity, expected_delay
from .metrics import RunMetrics, summarize
from .runner import replicate, run, simulate

__all__ = [
    "Config", "ConfigError", "NetworkParams", "ParameterError", "ProbabilityTable", "QbdSolution",
    "RunMetrics", "RunSettings", "StabilityError", "build_params", "capacity", "compute_table",
    "expected_delay", "load_config", "replicate", "run", "simulate", "summarize",
]
