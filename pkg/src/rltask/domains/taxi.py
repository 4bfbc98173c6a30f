"""Taxi domain with car orientation and turning costs.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row counted
from the bottom, so platform ``(0, 0)`` is bottom-left and ``(4, 4)`` is
top-right. A state is ``(x, y, passenger, destination, orientation)`` where
``passenger`` is a platform index or ``len(platforms)`` for "in the taxi".
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import EnvironmentDynamics, RLTask

NORTH, EAST, SOUTH, WEST = range(4)
PICKUP, DROPOFF = 4, 5
ACTION_NAMES = ("N", "E", "S", "W", "Pickup", "Dropoff")
HEADINGS = "NESW"
STEP = {NORTH: (0, 1), EAST: (1, 0), SOUTH: (0, -1), WEST: (-1, 0)}

# added cost for the move direction relative to the current heading
TURN_COST = {0: 0.0, 1: 0.05, 3: 0.1, 2: 0.2}  # keyed by (move - heading) % 4: right, left, back

PLATFORMS = ((0, 0), (0, 4), (3, 0), (4, 4))

# vertical barriers as blocked edges between (x, y) and (x + 1, y)
CLASSIC_WALLS = (
    ((0, 0), (1, 0)), ((0, 1), (1, 1)),
    ((1, 3), (2, 3)), ((1, 4), (2, 4)),
    ((2, 0), (3, 0)), ((2, 1), (3, 1)),
)

VARIANTS = ("trans_soft", "trans_hard", "state_based", "constant")


@dataclass(frozen=True)
class TaxiSpec:
    grid_size: int = 5
    platforms: tuple = PLATFORMS
    walls: tuple = CLASSIC_WALLS
    discount_variant: str = "trans_soft"
    gamma: float = 0.99
    soft_discount: float = 0.1
    gamma_c: float | None = None
    passenger_factor: float = 2.0
    step_reward: float = -1.0
    turn_costs: dict = field(default_factory=lambda: dict(TURN_COST))

    def __post_init__(self):
        if self.discount_variant not in VARIANTS:
            raise ValueError(f"unknown taxi discount variant {self.discount_variant!r}")
        if self.discount_variant == "constant" and self.gamma_c is None:
            raise ValueError("constant variant needs gamma_c")

    @property
    def n_platforms(self) -> int:
        return len(self.platforms)

    @property
    def n_states(self) -> int:
        g, l = self.grid_size, self.n_platforms
        return g * g * (l + 1) * l * 4


class Taxi:
    """State indexing and one-step semantics for a :class:`TaxiSpec`."""

    def __init__(self, spec: TaxiSpec = TaxiSpec()):
        self.spec = spec
        g, l = spec.grid_size, spec.n_platforms
        self.in_taxi = l
        self.dims = (g, g, l + 1, l, 4)
        self.n_states = spec.n_states
        self.n_actions = len(ACTION_NAMES)
        blocked = set()
        for a, b in spec.walls:
            blocked.add((tuple(a), tuple(b)))
            blocked.add((tuple(b), tuple(a)))
        self._blocked = blocked

    def index(self, x, y, passenger, destination, heading) -> int:
        return int(np.ravel_multi_index((x, y, passenger, destination, heading), self.dims))

    def decode(self, s: int) -> tuple[int, int, int, int, int]:
        return tuple(int(v) for v in np.unravel_index(s, self.dims))

    def move_target(self, x, y, direction):
        dx, dy = STEP[direction]
        nx, ny = x + dx, y + dy
        g = self.spec.grid_size
        if not (0 <= nx < g and 0 <= ny < g) or ((x, y), (nx, ny)) in self._blocked:
            return x, y, False
        return nx, ny, True

    def turn_cost(self, heading, direction, carrying) -> float:
        c = self.spec.turn_costs[(direction - heading) % 4]
        return c * (self.spec.passenger_factor if carrying else 1.0)

    def new_episode_pairs(self):
        l = self.spec.n_platforms
        return [(p, d) for p in range(l) for d in range(l) if p != d]

    def outcomes(self, s: int, a: int):
        """List of ``(probability, next_state, reward, turn_cost, event)``.

        ``event`` is one of ``None``, ``"pickup"``, ``"dropoff"``, ``"blocked"``.
        """
        x, y, p, d, h = self.decode(s)
        carrying = p == self.in_taxi
        spec = self.spec
        if a < 4:
            nx, ny, moved = self.move_target(x, y, a)
            if not moved:
                # a blocked move leaves the whole state unchanged
                return [(1.0, s, spec.step_reward, 0.0, "blocked")]
            tc = self.turn_cost(h, a, carrying)
            return [(1.0, self.index(nx, ny, p, d, a), spec.step_reward - tc, tc, None)]
        if a == PICKUP:
            if not carrying and (x, y) == tuple(spec.platforms[p]):
                return [(1.0, self.index(x, y, self.in_taxi, d, h), 0.0, 0.0, "pickup")]
            return [(1.0, s, spec.step_reward, 0.0, None)]
        if carrying and (x, y) == tuple(spec.platforms[d]):
            pairs = self.new_episode_pairs()
            prob = 1.0 / len(pairs)
            return [(prob, self.index(x, y, np_, nd, h), 0.0, 0.0, "dropoff") for np_, nd in pairs]
        return [(1.0, s, spec.step_reward, 0.0, None)]

    def location(self, s: int) -> tuple[int, int]:
        x, y, *_ = self.decode(s)
        return x, y

    def is_source_pickup(self, s: int, a: int) -> bool:
        x, y, p, d, h = self.decode(s)
        return a == PICKUP and p != self.in_taxi and (x, y) == tuple(self.spec.platforms[p])

    def carrying_at_platform(self, s: int) -> bool:
        """Passenger aboard while the car stands on a platform other than the destination."""
        x, y, p, d, h = self.decode(s)
        if p != self.in_taxi:
            return False
        return (x, y) in {tuple(q) for i, q in enumerate(self.spec.platforms) if i != d}


def build_taxi(spec: TaxiSpec = TaxiSpec()):
    """Enumerate the taxi: returns ``(taxi, dynamics, reward, turn_cost, events)`` tables.

    ``reward`` and ``turn_cost`` have shape ``(n, A, 1)`` because rewards only
    depend on the state and action taken.
    """
    taxi = Taxi(spec)
    n, n_a = taxi.n_states, taxi.n_actions
    P = np.zeros((n, n_a, n))
    R = np.zeros((n, n_a, 1))
    C = np.zeros((n, n_a, 1))
    for s in range(n):
        for a in range(n_a):
            for prob, sp, r, tc, _ in taxi.outcomes(s, a):
                P[s, a, sp] += prob
                R[s, a, 0] = r
                C[s, a, 0] = tc
    return taxi, EnvironmentDynamics(P), R, C


def taxi_discount(taxi: Taxi, variant: str | None = None) -> np.ndarray:
    """Discount table of shape ``(n, A, n)``-broadcastable for a variant."""
    spec = taxi.spec
    variant = spec.discount_variant if variant is None else variant
    n, n_a = taxi.n_states, taxi.n_actions
    if variant == "constant":
        return np.full((1, 1, 1), float(spec.gamma_c))
    if variant == "state_based":
        gs = np.full(n, spec.gamma)
        for s in range(n):
            if taxi.carrying_at_platform(s):
                gs[s] = 0.0
        return gs[None, None, :]
    g = np.full((n, n_a, 1), spec.gamma)
    value = spec.soft_discount if variant == "trans_soft" else 0.0
    for s in range(n):
        if taxi.is_source_pickup(s, PICKUP):
            g[s, PICKUP, 0] = value
    return g


def wall_collision_discount(taxi: Taxi) -> np.ndarray:
    """Discount that is zero on movement transitions that leave the state unchanged.

    Paired with a unit cumulant this predicts the probability of hitting a wall.
    """
    n, n_a = taxi.n_states, taxi.n_actions
    g = np.ones((n, n_a, 1))
    for s in range(n):
        x, y, *_ = taxi.decode(s)
        for a in range(4):
            if not taxi.move_target(x, y, a)[2]:
                g[s, a, 0] = 0.0
    return g


def make_taxi(spec: TaxiSpec = TaxiSpec()):
    """Return ``(dynamics, task)`` for the taxi with the discount variant named in ``spec``."""
    taxi, dyn, R, _ = build_taxi(spec)
    task = RLTask(reward=R, discount=taxi_discount(taxi), trace=0.0, interest=1.0)
    return dyn, task


# car at (2, 3) facing east, passenger waiting at (4, 4), destination (3, 0)
REFERENCE_START = (2, 3, 3, 2, EAST)


def successor_table(taxi: Taxi, actions):
    """Per-state successors under deterministic ``actions``.

    Returns ``(next_states (n, k), counts (n,), turn_cost (n,), dropoff (n,), pickup (n,))``;
    row ``s`` holds ``counts[s]`` equally likely successors.
    """
    n = taxi.n_states
    outs = [taxi.outcomes(s, int(actions[s])) for s in range(n)]
    k = max(len(o) for o in outs)
    nxt = np.zeros((n, k), dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    cost = np.zeros(n)
    drop = np.zeros(n, dtype=bool)
    pick = np.zeros(n, dtype=bool)
    for s, o in enumerate(outs):
        counts[s] = len(o)
        nxt[s, :len(o)] = [sp for _, sp, _, _, _ in o]
        cost[s] = o[0][3]
        drop[s] = o[0][4] == "dropoff"
        pick[s] = o[0][4] == "pickup"
    return nxt, counts, cost, drop, pick


def simulate_greedy(taxi: Taxi, actions, runs: int, steps: int, seed: int, start=REFERENCE_START):
    """Run ``runs`` independent ``steps``-step rollouts of a deterministic policy.

    All runs start in ``start`` and advance together; the only randomness
    is the new passenger drawn after each drop-off. Returns per-run
    ``(deliveries, turn_cost)`` arrays.
    """
    nxt, counts, cost, drop, _ = successor_table(taxi, actions)
    rng = np.random.default_rng(seed)
    s = np.full(runs, taxi.index(*start), dtype=np.int64)
    deliveries = np.zeros(runs)
    turn = np.zeros(runs)
    for _ in range(steps):
        pick = np.minimum((rng.random(runs) * counts[s]).astype(np.int64), counts[s] - 1)
        deliveries += drop[s]
        turn += cost[s]
        s = nxt[s, pick]
    return deliveries, turn


def greedy_route(taxi: Taxi, actions, start=REFERENCE_START, max_steps: int = 30):
    """Locations visited by a deterministic policy until the first drop-off.

    Moves record the new ``(x, y)``; a successful pickup records ``"Pickup"``.
    Stops at the drop-off, or when a state repeats, or after ``max_steps``.
    """
    s = taxi.index(*start)
    route, seen = [], {s}
    for _ in range(max_steps):
        a = int(actions[s])
        (_, sp, _, _, event), *_ = taxi.outcomes(s, a)
        if event == "dropoff":
            break
        if event == "pickup":
            route.append("Pickup")
        elif a < 4 and event != "blocked":
            route.append(taxi.location(sp))
        if sp in seen and event != "pickup":
            route.append("...")
            break
        seen.add(sp)
        s = sp
    return route
