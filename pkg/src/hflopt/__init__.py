"""Energy/latency modelling and resource optimisation for hierarchical federated learning."""

from .cost import Allocation, CostReport, total_cost
from .errors import (
    DivergenceError,
    HFLError,
    InfeasibleRateError,
    InfiniteDelayError,
    InvalidInputError,
    SchemaError,
)
from .scenario import Assignment, Scenario, generate_scenario, geo_initial_assignment
from .sroa import SolverConfig, SroaResult, sroa
from .tsia import TsiaResult, tsia

__version__ = "0.1.0"

__all__ = [
    "Allocation", "Assignment", "CostReport", "DivergenceError", "HFLError",
    "InfeasibleRateError", "InfiniteDelayError", "InvalidInputError", "Scenario",
    "SchemaError", "SolverConfig", "SroaResult", "TsiaResult", "generate_scenario",
    "geo_initial_assignment", "sroa", "total_cost", "tsia",
]
