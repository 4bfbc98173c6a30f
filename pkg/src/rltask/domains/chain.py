"""Three-state chain written as an episodic problem in four ways.

States ``s1, s2, s3`` are indices 0, 1, 2. ``RIGHT`` moves one state to the
right, ``LEFT`` one to the left (``s1`` stays put). Going right from ``s3``
ends the episode. Every step costs 1.
"""
import numpy as np

from ..core import EnvironmentDynamics, Policy, RLTask

RIGHT, LEFT = 0, 1
KINDS = ("absorbing", "transition_based", "state_based_augmented", "state_based_incorrect")


def _chain_moves(n_states):
    P = np.zeros((n_states, 2, n_states))
    for s in range(3):
        P[s, LEFT, max(s - 1, 0)] = 1.0
        if s < 2:
            P[s, RIGHT, s + 1] = 1.0
    return P


def make_chain(kind: str = "transition_based"):
    """Return ``(dynamics, task)`` for one formulation of the chain.

    ``absorbing``
        ``s3 --right--> s4`` where ``s4`` is a zero-reward self loop, discount 1 everywhere.
    ``transition_based``
        ``s3 --right--> s1`` with discount zero on that transition only.
    ``state_based_augmented``
        ``s3 --right--> s4 --any--> s1`` with state discount zero on entering ``s4``.
        The step out of ``s4`` has reward 0.
    ``state_based_incorrect``
        ``s3 --right--> s1`` with state discount zero on entering ``s1``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown chain kind {kind!r}; expected one of {KINDS}")
    if kind == "transition_based":
        P = _chain_moves(3)
        P[2, RIGHT, 0] = 1.0
        gamma = np.ones((3, 2, 3))
        gamma[2, RIGHT, 0] = 0.0
        return EnvironmentDynamics(P), RLTask(reward=-1.0, discount=gamma)
    if kind == "state_based_incorrect":
        P = _chain_moves(3)
        P[2, RIGHT, 0] = 1.0
        gamma_s = np.array([0.0, 1.0, 1.0])
        return EnvironmentDynamics(P), RLTask(reward=-1.0, discount=gamma_s[None, None, :])

    P = _chain_moves(4)
    P[2, RIGHT, 3] = 1.0
    reward = np.full((4, 2, 1), -1.0)
    reward[3] = 0.0
    if kind == "absorbing":
        P[3, :, 3] = 1.0
        return EnvironmentDynamics(P), RLTask(reward=reward, discount=1.0)
    P[3, :, 0] = 1.0
    gamma_s = np.array([1.0, 1.0, 1.0, 0.0])
    return EnvironmentDynamics(P), RLTask(reward=reward, discount=gamma_s[None, None, :])


def chain_policy(kind: str, p_right: float = 1.0) -> Policy:
    """Policy picking right with probability ``p_right`` in ``s1..s3``; uniform in ``s4``."""
    n = 3 if kind in ("transition_based", "state_based_incorrect") else 4
    probs = np.tile([p_right, 1.0 - p_right], (n, 1))
    if n == 4:
        probs[3] = 0.5
    return Policy(probs)


def lifted_chain_features(kind: str, X3) -> np.ndarray:
    """Extend features for ``s1..s3`` to the chain kind, copying ``x(s1)`` onto ``s4``."""
    X3 = np.asarray(X3, dtype=float)
    if kind in ("transition_based", "state_based_incorrect"):
        return X3.copy()
    return np.vstack([X3, X3[0]])
