"""Environment dynamics, RL tasks, policies and the policy-weighted matrices.

An :class:`RLTask` is layered on top of fixed :class:`EnvironmentDynamics`:
the same transition model can carry many tasks, each with its own reward,
transition-based discount ``gamma(s, a, s')``, trace ``lambda(s, a, s')``
and interest ``i(s)``.

Per-transition tables are stored as arrays broadcastable to
``(n_states, n_actions, n_states)``. A constant discount can therefore be a
0-d array and a discount that only depends on ``(s, a)`` can have shape
``(n, A, 1)``, which keeps the 2000-state taxi domain small.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph

PROB_TOL = 1e-12
DIRECT_STATIONARY_MAX = 3000

TransitionFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
TableLike = Union[float, np.ndarray, TransitionFn]


class TaskError(ValueError):
    """Invalid probabilities, discounts, traces or interest values."""


class StructureError(ValueError):
    """Array shapes of dynamics, task, policy or features do not agree."""


class TerminationError(np.linalg.LinAlgError):
    """The discount never drops below one along the policy.

    Raised whenever ``I - P_{pi,gamma}`` (or a matrix derived from it) is
    singular, so there is no finite value function.
    """


class StationaryDistributionError(RuntimeError):
    """No unique stationary distribution could be computed."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_stochastic(table: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(table)):
        raise TaskError(f"{what} has non-finite entries")
    if np.any(table < 0):
        raise TaskError(f"{what} has negative entries")
    sums = table.sum(axis=-1)
    bad = np.abs(sums - 1.0) > PROB_TOL
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise TaskError(
            f"{what} row {idx} sums to {sums[idx]!r}, not 1 (renormalization is refused)"
        )


@dataclass(frozen=True)
class EnvironmentDynamics:
    """Finite MDP dynamics; ``transition[s, a, s']`` is Pr(s, a, s')."""

    transition: np.ndarray

    def __post_init__(self):
        t = _as_readonly(self.transition)
        if t.ndim != 3 or t.shape[0] != t.shape[2] or t.shape[0] == 0 or t.shape[1] == 0:
            raise StructureError(f"transition must have shape (n, A, n), got {t.shape}")
        _check_stochastic(t, "transition")
        object.__setattr__(self, "transition", t)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.transition.shape


@dataclass(frozen=True)
class Policy:
    """Tabular stochastic policy, ``probs[s, a]`` = pi(s, a)."""

    probs: np.ndarray

    def __post_init__(self):
        p = _as_readonly(self.probs)
        if p.ndim != 2:
            raise StructureError(f"policy must have shape (n, A), got {p.shape}")
        _check_stochastic(p, "policy")
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "Policy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), actions] = 1.0
        return cls(probs)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]


def tabulate(fn: TransitionFn, n_states: int, n_actions: int) -> np.ndarray:
    """Materialize a vectorized ``fn(s, a, s')`` into an ``(n, A, n)`` table."""
    s, a, sp = np.ix_(np.arange(n_states), np.arange(n_actions), np.arange(n_states))
    return np.broadcast_to(np.asarray(fn(s, a, sp), dtype=float), (n_states, n_actions, n_states)).copy()


def constant_discount(gamma_c: float) -> TransitionFn:
    """Discount function returning ``gamma_c`` for every transition."""
    if not 0.0 <= gamma_c <= 1.0:
        raise TaskError(f"constant discount {gamma_c} outside [0, 1]")

    def discount(s, a, sp):
        return np.full(np.broadcast(s, a, sp).shape, float(gamma_c))

    discount.constant = float(gamma_c)
    return discount


def state_based_discount(gamma_s) -> TransitionFn:
    """Discount function that depends only on the state entered, gamma_s(s')."""
    g = np.asarray(gamma_s, dtype=float)
    if g.ndim != 1:
        raise TaskError("state-based discount must be a vector")
    if np.any((g < 0) | (g > 1)) or not np.all(np.isfinite(g)):
        raise TaskError("state-based discount values must lie in [0, 1]")
    g = g.copy()

    def discount(s, a, sp):
        return np.broadcast_to(g[sp], np.broadcast(s, a, sp).shape).astype(float)

    discount.state_values = g
    return discount


def _table(value: TableLike, n_states: int | None, n_actions: int | None, what: str) -> np.ndarray:
    if callable(value):
        if n_states is None or n_actions is None:
            raise StructureError(f"{what} given as a function needs n_states and n_actions")
        return _as_readonly(tabulate(value, n_states, n_actions))
    t = _as_readonly(value)
    if t.ndim > 3:
        raise StructureError(f"{what} table has too many dimensions: {t.shape}")
    return t


@dataclass(frozen=True)
class RLTask:
    """Reward, transition-based discount, trace and interest over some dynamics.

    ``reward``, ``discount`` and ``trace`` are arrays broadcastable to
    ``(n, A, n)``; ``interest`` is broadcastable to ``(n,)``. Callables
    ``f(s, a, s')`` are accepted when ``n_states`` and ``n_actions`` are given
    and are tabulated immediately.
    """

    reward: np.ndarray
    discount: np.ndarray
    trace: np.ndarray = field(default_factory=lambda: np.float64(0.0))
    interest: np.ndarray = field(default_factory=lambda: np.float64(1.0))

    def __post_init__(self):
        for name in ("reward", "discount", "trace"):
            object.__setattr__(self, name, _table(getattr(self, name), None, None, name))
        object.__setattr__(self, "interest", _as_readonly(self.interest))
        if not np.all(np.isfinite(self.reward)):
            raise TaskError("reward has non-finite entries")
        for name in ("discount", "trace"):
            t = getattr(self, name)
            if not np.all(np.isfinite(t)) or np.any((t < 0) | (t > 1)):
                raise TaskError(f"{name} values must lie in [0, 1]")
        if self.interest.ndim > 1:
            raise StructureError("interest must be a scalar or a vector")
        if not np.all(np.isfinite(self.interest)) or np.any(self.interest < 0):
            raise TaskError("interest must be finite and nonnegative")

    @classmethod
    def from_functions(cls, n_states: int, n_actions: int, reward: TableLike, discount: TableLike,
                       trace: TableLike = 0.0, interest=1.0) -> "RLTask":
        return cls(
            reward=_table(reward, n_states, n_actions, "reward"),
            discount=_table(discount, n_states, n_actions, "discount"),
            trace=_table(trace, n_states, n_actions, "trace"),
            interest=interest,
        )

    def replace(self, **changes) -> "RLTask":
        kw = dict(reward=self.reward, discount=self.discount, trace=self.trace, interest=self.interest)
        kw.update(changes)
        return RLTask(**kw)

    def table(self, name: str, shape: tuple[int, int, int]) -> np.ndarray:
        """Read-only view of a per-transition table broadcast to ``shape``."""
        try:
            return np.broadcast_to(getattr(self, name), shape)
        except ValueError:
            raise StructureError(f"{name} table {getattr(self, name).shape} does not fit dynamics {shape}") from None

    def interest_vector(self, n_states: int) -> np.ndarray:
        try:
            return np.broadcast_to(self.interest, (n_states,)).copy()
        except ValueError:
            raise StructureError(f"interest {self.interest.shape} does not fit {n_states} states") from None

    def check(self, dyn: EnvironmentDynamics) -> None:
        for name in ("reward", "discount", "trace"):
            self.table(name, dyn.shape)
        self.interest_vector(dyn.n_states)


@dataclass(frozen=True)
class Option:
    """Option ``(policy, termination beta(s), initiation set)``."""

    policy: Policy
    termination: np.ndarray
    initiation: frozenset

    def __post_init__(self):
        beta = _as_readonly(self.termination)
        if beta.shape != (self.policy.n_states,):
            raise StructureError("termination must have one value per state")
        if np.any((beta < 0) | (beta > 1)):
            raise TaskError("termination probabilities must lie in [0, 1]")
        init = frozenset(int(s) for s in self.initiation)
        if not init:
            raise TaskError("initiation set must be nonempty")
        if min(init) < 0 or max(init) >= self.policy.n_states:
            raise TaskError("initiation set refers to unknown states")
        object.__setattr__(self, "termination", beta)
        object.__setattr__(self, "initiation", init)


def option_to_task(opt: Option, base_reward: TableLike, n_actions: int | None = None,
                   trace: TableLike = 1.0) -> RLTask:
    """Cast an option as an RL task.

    The discount is ``1 - beta(s')`` on every transition, interest is the
    indicator of the initiation set and the trace defaults to 1.
    """
    n = opt.policy.n_states
    n_actions = opt.policy.n_actions if n_actions is None else n_actions
    interest = np.zeros(n)
    interest[sorted(opt.initiation)] = 1.0
    return RLTask(
        reward=_table(base_reward, n, n_actions, "reward"),
        discount=(1.0 - opt.termination)[None, None, :],
        trace=_table(trace, n, n_actions, "trace"),
        interest=interest,
    )


@dataclass(frozen=True)
class PolicyMatrices:
    """Policy-weighted transition matrices and expected reward."""

    P_pi: np.ndarray
    P_pi_gamma: np.ndarray
    P_pi_gamma_lambda: np.ndarray
    P_pi_gamma_one_minus_lambda: np.ndarray
    r_pi: np.ndarray

    @property
    def n_states(self) -> int:
        return self.r_pi.shape[0]


def build_matrices(dyn: EnvironmentDynamics, task: RLTask, policy: Policy) -> PolicyMatrices:
    """Build P_pi, P_{pi,gamma}, P_{pi,gamma,lambda}, P_{pi,gamma,1-lambda} and r_pi."""
    n, n_a, _ = dyn.shape
    if policy.probs.shape != (n, n_a):
        raise StructureError(f"policy shape {policy.probs.shape} does not match dynamics {(n, n_a)}")
    task.check(dyn)
    gamma = task.table("discount", dyn.shape)
    lam = task.table("trace", dyn.shape)
    reward = task.table("reward", dyn.shape)

    P = np.zeros((n, n))
    Pg = np.zeros((n, n))
    Pgl = np.zeros((n, n))
    r = np.zeros(n)
    # one action at a time keeps peak memory at O(n^2)
    for a in range(n_a):
        w = policy.probs[:, a, None] * dyn.transition[:, a, :]
        P += w
        r += (w * reward[:, a, :]).sum(axis=1)
        wg = w * gamma[:, a, :]
        Pg += wg
        Pgl += wg * lam[:, a, :]
    return PolicyMatrices(
        P_pi=_as_readonly(P),
        P_pi_gamma=_as_readonly(Pg),
        P_pi_gamma_lambda=_as_readonly(Pgl),
        P_pi_gamma_one_minus_lambda=_as_readonly(Pg - Pgl),
        r_pi=_as_readonly(r),
    )


def check_termination(P_gamma: np.ndarray, tol: float = 1e-12) -> None:
    """Raise :class:`TerminationError` unless every state reaches a discount leak.

    ``I - P_gamma`` is nonsingular exactly when, following the nonzero entries
    of ``P_gamma``, every state can reach a row whose sum is below one.
    """
    n = P_gamma.shape[0]
    leaking = P_gamma.sum(axis=1) < 1.0 - tol
    if not leaking.any():
        raise TerminationError("discount never terminates: no reachable transition has gamma < 1")
    # reverse graph plus a virtual sink fed by every leaking state
    g = sparse.csr_matrix(P_gamma > 0).T.tocoo()
    rows = np.concatenate([g.row, np.full(leaking.sum(), n)])
    cols = np.concatenate([g.col, np.flatnonzero(leaking)])
    graph = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n + 1, n + 1))
    reached = csgraph.breadth_first_order(graph, n, directed=True, return_predecessors=False)
    if len(reached) < n + 1:
        stuck = sorted(set(range(n)) - set(reached.tolist()))
        raise TerminationError(
            f"discount never terminates from states {stuck[:10]}"
        )


def stationary_distribution(P: np.ndarray, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix with one closed class.

    Transient states get zero mass. The closed class is solved directly when
    it has at most ``DIRECT_STATIONARY_MAX`` states. Larger classes iterate
    the lazy chain ``(I + P) / 2`` from the uniform vector, which has the same
    fixed point but is aperiodic, until the L1 change drops below ``tol``.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if P.shape != (n, n):
        raise StructureError(f"transition matrix must be square, got {P.shape}")
    _check_stochastic(P, "transition matrix")
    sp = sparse.csr_matrix(P)
    closed = closed_class(sp)
    # transient states carry exactly zero mass
    sub = sp[closed][:, closed]
    m = len(closed)
    out = np.zeros(n)
    if m <= DIRECT_STATIONARY_MAX:
        # d (I - P) = 0 with one balance equation swapped for sum(d) = 1
        M = np.eye(m) - sub.toarray().T
        M[-1] = 1.0
        rhs = np.zeros(m)
        rhs[-1] = 1.0
        d = np.clip(linalg.solve(M, rhs), 0.0, None)
        out[closed] = d / d.sum()
        return out
    op = sub.T.tocsr() if sub.nnz < 0.25 * m * m else np.ascontiguousarray(sub.toarray().T)
    d = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        d_new = 0.5 * (d + op @ d)
        d_new /= d_new.sum()
        if np.abs(d_new - d).sum() < tol:
            d_new[d_new < 0] = 0.0
            out[closed] = d_new / d_new.sum()
            return out
        d = d_new
    raise StationaryDistributionError(f"no unique stationary distribution: power iteration did not converge in {max_iter} steps")


def closed_class(P) -> np.ndarray:
    """Indices of the single closed communicating class of a stochastic matrix."""
    sp = sparse.csr_matrix(P)
    n_comp, labels = csgraph.connected_components(sp, directed=True, connection="strong")
    leaves = np.ones(n_comp, dtype=bool)
    coo = sp.tocoo()
    cross = labels[coo.row] != labels[coo.col]
    leaves[np.unique(labels[coo.row[cross]])] = False
    if leaves.sum() != 1:
        raise StationaryDistributionError(
            f"no unique stationary distribution: {leaves.sum()} closed classes"
        )
    return np.flatnonzero(labels == np.flatnonzero(leaves)[0])
