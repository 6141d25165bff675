"""Solvers, constants and verification oracles for unconstrained stochastic
variational inequalities over finite-sum operators."""

from . import constants, experiments, numerics, operators, sampling, solvers, verify
from .operators import CosineOperator, FiniteSumOperator, QuadraticGame
from .sampling import SamplingScheme, SamplingVector
from .solvers import (
    ConstantSchedule,
    RunConfig,
    RunTrace,
    ScoSwitchingSchedule,
    SgdaSwitchingSchedule,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "CosineOperator",
    "FiniteSumOperator",
    "QuadraticGame",
    "SamplingScheme",
    "SamplingVector",
    "ConstantSchedule",
    "SgdaSwitchingSchedule",
    "ScoSwitchingSchedule",
    "RunConfig",
    "RunTrace",
    "run",
    "constants",
    "experiments",
    "numerics",
    "operators",
    "sampling",
    "solvers",
    "verify",
]
