"""Price-maker community energy storage management as a finite-horizon MDP."""
from .market import (
    DemandParams,
    MarketParams,
    ObjectiveMode,
    SlopeTable,
    StageMarket,
)
from .mdp import MdpInstance, StorageGrid, StorageSpec
from .policy import PolicyTable, ValueTable
from .uncertainty import PriceForecastModel, RenewableChain, estimate_chain
from .sdp import backward_induction
from .threshold import MarginalCurve
from .threshold import solve as solve_threshold
from .dataio import RunConfig, Scenario, assemble
from .evaluation import compare_cases, evaluate_policy, monte_carlo, oracle_enumerate, rollout
from .datasets import bundled_day, bundled_scenario
from .studies import benchmark, capacity_sweep, periodicity_study

__all__ = [
    "DemandParams",
    "MarketParams",
    "MdpInstance",
    "MarginalCurve",
    "ObjectiveMode",
    "PolicyTable",
    "PriceForecastModel",
    "RenewableChain",
    "RunConfig",
    "Scenario",
    "SlopeTable",
    "StageMarket",
    "StorageGrid",
    "StorageSpec",
    "ValueTable",
    "assemble",
    "backward_induction",
    "benchmark",
    "bundled_day",
    "bundled_scenario",
    "capacity_sweep",
    "compare_cases",
    "estimate_chain",
    "evaluate_policy",
    "monte_carlo",
    "oracle_enumerate",
    "periodicity_study",
    "rollout",
    "solve_threshold",
]

__version__ = "0.1.0"
