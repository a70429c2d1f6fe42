"""Discrete-event simulator for OLSR and MP-OLSR link-failure recovery."""

from .harness import ScenarioSpec, parse_config, preset, run_batch, run_scenario, write_results
from .metrics import analytic_bounds
from .olsr import ProtocolConfig

__all__ = [
    "ProtocolConfig",
    "ScenarioSpec",
    "analytic_bounds",
    "parse_config",
    "preset",
    "run_batch",
    "run_scenario",
    "write_results",
]
