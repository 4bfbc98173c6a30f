"""Random extra terminations reachable within a few steps of chosen states."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import EnvironmentDynamics, RLTask

MODES = ("single_path", "all_paths")


@dataclass(frozen=True)
class TerminationPattern:
    mode: str = "single_path"
    fraction: float = 0.01
    horizon: int = 5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown termination mode {self.mode!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")

    def count(self, n_states: int) -> int:
        return math.ceil(self.fraction * n_states - 1e-9)


def _successors(dyn: EnvironmentDynamics, states) -> np.ndarray:
    reach = dyn.transition[np.asarray(sorted(states))].sum(axis=(0, 1)) > 0
    return np.flatnonzero(reach)


def apply_random_termination(dyn: EnvironmentDynamics, task: RLTask, pattern: TerminationPattern,
                             seed: int):
    """Add zero-discount transitions near a random subset of states.

    ``single_path``: along one random action sequence of ``horizon`` steps from
    each selected state, one transition gets discount zero.
    ``all_paths``: for a random depth ``k < horizon`` every transition leaving
    a state reachable in exactly ``k`` steps gets discount zero, so every path
    terminates within ``horizon`` steps.

    Returns ``(new_task, selected_states)``.
    """
    rng = np.random.default_rng(seed)
    n, n_a, _ = dyn.shape
    k = pattern.count(n)
    if k == 0:
        return task, np.array([], dtype=int)
    selected = np.sort(rng.choice(n, size=k, replace=False))
    per_pair = task.discount.ndim == 3 and task.discount.shape[2] == 1
    shape = (n, n_a, 1) if per_pair else (n, n_a, n)
    gamma = np.array(np.broadcast_to(task.discount, shape), dtype=float)

    for s in selected:
        depth = int(rng.integers(pattern.horizon))
        if pattern.mode == "single_path":
            cur = int(s)
            for step in range(depth + 1):
                a = int(rng.integers(n_a))
                nxt = int(rng.choice(n, p=dyn.transition[cur, a]))
                if step == depth:
                    if per_pair:
                        gamma[cur, a, 0] = 0.0
                    else:
                        gamma[cur, a, nxt] = 0.0
                cur = nxt
        else:
            frontier = {int(s)}
            for _ in range(depth):
                frontier = set(_successors(dyn, frontier).tolist())
            gamma[sorted(frontier)] = 0.0
    return task.replace(discount=gamma), selected


def path_property(dyn: EnvironmentDynamics, task: RLTask, state: int, horizon: int = 5):
    """Exhaustively enumerate all paths of ``horizon`` steps from ``state``.

    Returns ``(any_path_terminates, every_path_terminates)`` where a path
    terminates if one of its transitions has discount zero.
    """
    n, n_a, _ = dyn.shape
    gamma = task.table("discount", dyn.shape)
    # frontier maps state -> (some path so far terminated, all paths so far terminated)
    frontier = {int(state): (False, False)}
    for _ in range(horizon):
        nxt: dict[int, tuple[bool, bool]] = {}
        for s, (some, every) in frontier.items():
            for a in range(n_a):
                for sp in np.flatnonzero(dyn.transition[s, a] > 0):
                    hit = gamma[s, a, sp] == 0.0
                    new = (some or hit, every or hit)
                    old = nxt.get(int(sp))
                    nxt[int(sp)] = new if old is None else (old[0] or new[0], old[1] and new[1])
        frontier = nxt
    some = any(v[0] for v in frontier.values())
    every = all(v[1] for v in frontier.values())
    return some, every
