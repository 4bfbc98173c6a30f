"""Two-state MDP where a transition-based trace breaks D_pi contraction."""
import numpy as np

from ..core import EnvironmentDynamics, RLTask


def make_counterexample(gamma_c: float = 0.99, trace_into_first: float = 0.9):
    """Uniform transitions, one action, constant discount.

    The trace is ``trace_into_first`` on transitions entering state 0 and 0 on
    transitions entering state 1. Rewards are zero.
    """
    dyn = EnvironmentDynamics(np.full((2, 1, 2), 0.5))
    trace = np.array([trace_into_first, 0.0])[None, None, :]
    task = RLTask(reward=0.0, discount=gamma_c, trace=trace, interest=1.0)
    return dyn, task
