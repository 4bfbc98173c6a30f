"""Seeded random tasks for property checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EnvironmentDynamics, Policy, RLTask


@dataclass(frozen=True)
class RandomTask:
    dynamics: EnvironmentDynamics
    task: RLTask
    target: Policy
    behavior: Policy
    seed: int


def random_policy(rng, n_states, n_actions, floor=0.0) -> Policy:
    """Dirichlet(1) action probabilities, mixed with uniform by ``floor``."""
    probs = rng.dirichlet(np.ones(n_actions), size=n_states)
    if floor > 0:
        probs = (1 - floor) * probs + floor / n_actions
    return Policy(probs)


def random_task(seed: int, n_states=None, n_actions=None, trace="random", gamma_c=None,
                max_states=6, max_actions=3) -> RandomTask:
    """Dense random task.

    Transition rows are Dirichlet(1), rewards uniform in [-1, 1] and the
    discount uniform in [0.3, 1] per transition with at least one value below
    0.9. ``gamma_c`` replaces the discount by a constant. ``trace`` is
    ``"random"`` for a per-transition uniform trace or a constant. The
    behavior policy keeps every action probability above zero.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_states + 1)) if n_states is None else n_states
    n_a = int(rng.integers(1, max_actions + 1)) if n_actions is None else n_actions
    P = rng.dirichlet(np.ones(n), size=(n, n_a))
    reward = rng.uniform(-1.0, 1.0, size=(n, n_a, n))
    if gamma_c is None:
        gamma = rng.uniform(0.3, 1.0, size=(n, n_a, n))
        if gamma.min() >= 0.9:
            idx = tuple(rng.integers(k) for k in gamma.shape)
            gamma[idx] = rng.uniform(0.3, 0.9)
    else:
        gamma = np.float64(gamma_c)
    lam = rng.uniform(0.0, 1.0, size=(n, n_a, n)) if trace == "random" else np.float64(trace)
    task = RLTask(reward=reward, discount=gamma, trace=lam, interest=rng.uniform(0.1, 1.0, size=n))
    return RandomTask(
        dynamics=EnvironmentDynamics(P),
        task=task,
        target=random_policy(rng, n, n_a),
        behavior=random_policy(rng, n, n_a, floor=0.2),
        seed=seed,
    )


def corpus(count: int, start_seed: int = 0, **kw):
    for k in range(count):
        yield random_task(start_seed + k, **kw)
