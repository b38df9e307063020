"""condsim: contact-dynamics engine built on a velocity fixed-point solver
with per-node diagonal step matrices, plus impulse-space baselines and a
scenario/benchmark harness."""

from .errors import (
    CapacityError,
    CondsimError,
    DegenerateConstraintError,
    DimensionMismatchError,
    DivergenceError,
    InvalidMatrixError,
    InvalidStateError,
    NotPositiveDefiniteError,
    ScenarioValidationError,
    UnsupportedRegimeError,
)
from .harness import RunConfig, Scenario, analytic_box_slide, bench_scaling, load_scenario, run
from .solver import SolverConfig, solve_vfpi

__all__ = [
    "CapacityError",
    "CondsimError",
    "DegenerateConstraintError",
    "DimensionMismatchError",
    "DivergenceError",
    "InvalidMatrixError",
    "InvalidStateError",
    "NotPositiveDefiniteError",
    "ScenarioValidationError",
    "UnsupportedRegimeError",
    "RunConfig",
    "Scenario",
    "SolverConfig",
    "analytic_box_slide",
    "bench_scaling",
    "load_scenario",
    "run",
    "solve_vfpi",
]

__version__ = "0.1.0"
