"""Deterministic smart-grid simulator.

Per tick: local knapsack allocation inside each house, DSM strategy
generation and selection, auction-based energy booking with bounded
feedback, and incremental max-flow routing from producers to substations.
"""

__version__ = "0.1.0"

from .engine import Engine, TickResult, global_optimum_oracle, profit_metric
from .io import ScenarioError, load_scenario, write_scenario
from .model import (
    Device,
    House,
    Microgrid,
    NetworkEdge,
    Producer,
    ScenarioConfig,
    validate_scenario,
)
from .scenario import TopologyParams, random_scenario

__all__ = [
    "Device",
    "Engine",
    "House",
    "Microgrid",
    "NetworkEdge",
    "Producer",
    "ScenarioConfig",
    "ScenarioError",
    "TickResult",
    "TopologyParams",
    "__version__",
    "global_optimum_oracle",
    "load_scenario",
    "profit_metric",
    "random_scenario",
    "validate_scenario",
    "write_scenario",
]
