"""Reinforcement-learning tasks with transition-based discounting."""
__version__ = "0.1.0"

from .core import (
    EnvironmentDynamics,
    Option,
    Policy,
    PolicyMatrices,
    RLTask,
    StationaryDistributionError,
    StructureError,
    TaskError,
    TerminationError,
    build_matrices,
    check_termination,
    option_to_task,
    stationary_distribution,
)
from .bellman import LambdaOperator, exact_value, lambda_operator
from .contraction import Weighting, build_system, weighted_norm

__all__ = [
    "EnvironmentDynamics", "Option", "Policy", "PolicyMatrices", "RLTask",
    "StationaryDistributionError", "StructureError", "TaskError", "TerminationError",
    "build_matrices", "check_termination", "option_to_task", "stationary_distribution",
    "LambdaOperator", "exact_value", "lambda_operator", "Weighting", "build_system", "weighted_norm",
]
