"""State-based MDP induced by routing each transition through its own state.

For every triple ``(s, a, s')`` a hypothetical state ``f`` is added. The
agent moves ``s -> f`` with probability ``Pr(s, a, s')`` and reward
``r(s, a, s')``, then ``f -> s'`` with probability one and reward zero.
Entering ``f`` is discounted by ``gamma(s, a, s')`` and entering an original
state by one, so the discount depends only on the state entered.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bellman import exact_value, lambda_operator
from .contraction import Weighting, build_system
from .core import EnvironmentDynamics, Policy, PolicyMatrices, RLTask, build_matrices, stationary_distribution


@dataclass(frozen=True)
class InducedStateMDP:
    dynamics: EnvironmentDynamics
    task: RLTask
    gamma_s_bar: np.ndarray
    origin: np.ndarray  # (|F|, 3) triples (s, a, s') in index order
    policy_bar: Policy
    n_original: int
    n_actions: int

    @property
    def n_states(self) -> int:
        return self.dynamics.n_states

    def f_index(self, s, a, sp) -> int:
        n = self.n_original
        return n + (s * self.n_actions + a) * n + sp

    def lift_features(self, X) -> np.ndarray:
        """Features with ``x(f_{s a s'}) = x(s')``."""
        X = np.asarray(X, dtype=float)
        return np.vstack([X, X[self.origin[:, 2]]])


def induced_size(n_states: int, n_actions: int) -> int:
    return n_actions * n_states * n_states + n_states


def induce_state_based(dyn: EnvironmentDynamics, task: RLTask, policy: Policy) -> InducedStateMDP:
    """Build the induced MDP; hypothetical states exist for every triple, reachable or not.

    The trace is lifted so that lambda-returns agree: it is 1 on ``s -> f`` and
    ``lambda(s, a, s')`` on ``f -> s'``.
    """
    n, n_a, _ = dyn.shape
    task.check(dyn)
    N = induced_size(n, n_a)
    s_idx, a_idx, sp_idx = (g.ravel() for g in np.meshgrid(np.arange(n), np.arange(n_a), np.arange(n),
                                                            indexing="ij"))
    f = n + (s_idx * n_a + a_idx) * n + sp_idx
    origin = np.column_stack([s_idx, a_idx, sp_idx])

    P = np.zeros((N, n_a, N))
    P[s_idx, a_idx, f] = dyn.transition[s_idx, a_idx, sp_idx]
    P[f, :, sp_idx] = 1.0

    reward = np.zeros((N, n_a, N))
    reward[s_idx, a_idx, f] = task.table("reward", dyn.shape)[s_idx, a_idx, sp_idx]

    gamma_s = np.ones(N)
    gamma_s[f] = task.table("discount", dyn.shape)[s_idx, a_idx, sp_idx]

    trace = np.ones((N, n_a, N))
    trace[f, :, sp_idx] = task.table("trace", dyn.shape)[s_idx, a_idx, sp_idx][:, None]

    interest = np.zeros(N)
    interest[:n] = task.interest_vector(n)

    probs = np.full((N, n_a), 1.0 / n_a)
    probs[:n] = policy.probs
    return InducedStateMDP(
        dynamics=EnvironmentDynamics(P),
        task=RLTask(reward=reward, discount=gamma_s[None, None, :], trace=trace, interest=interest),
        gamma_s_bar=gamma_s,
        origin=origin,
        policy_bar=Policy(probs),
        n_original=n,
        n_actions=n_a,
    )


@dataclass
class EquivalenceReport:
    d_error: float
    v_error: float
    f_error: float
    normalizer: float
    objective_error: float
    tol_d: float = 1e-10
    tol_v: float = 1e-9
    mismatches: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def as_dict(self) -> dict:
        return {
            "stationary_max_error": self.d_error,
            "value_max_error": self.v_error,
            "hypothetical_value_max_error": self.f_error,
            "normalizer": self.normalizer,
            "objective_error": self.objective_error,
            "passed": self.passed,
            "mismatches": list(self.mismatches),
        }


def verify_equivalence(dyn: EnvironmentDynamics, task: RLTask, policy: Policy,
                       induced: InducedStateMDP | None = None, tol_d=1e-10, tol_v=1e-9) -> EquivalenceReport:
    """Compare stationary distributions and values of a task and its induced MDP.

    Checks the renormalized induced distribution on original states against
    ``d_pi``, ``v_bar(s) = v(s)`` on original states, ``v_bar(f) = v_bar(s')``
    on reachable hypothetical states and the objective identity
    ``sum d_bar v_bar = (2 / c) sum d v`` where ``c`` normalizes ``d_bar``.
    Singular value systems raise :class:`TerminationError` on either side.
    """
    if induced is None:
        induced = induce_state_based(dyn, task, policy)
    n = dyn.n_states
    mats = build_matrices(dyn, task, policy)
    v = exact_value(mats)
    d = stationary_distribution(mats.P_pi)

    bar = build_matrices(induced.dynamics, induced.task, induced.policy_bar)
    v_bar = exact_value(bar)
    d_bar = stationary_distribution(bar.P_pi)

    reach = d_bar[n:] > 0
    d_err = float(np.max(np.abs(d_bar[:n] / d_bar[:n].sum() - d)))
    v_err = float(np.max(np.abs(v_bar[:n] - v)))
    f_gap = np.abs(v_bar[n:] - v_bar[induced.origin[:, 2]])
    f_err = float(np.max(f_gap[reach])) if reach.any() else 0.0
    # unnormalized weights: d on S, d(s) pi(s,a) Pr(s,a,s') on F, total mass c = 2
    c = 1.0 / d_bar[:n].sum()
    obj_err = abs(float(d_bar @ v_bar) - 2.0 / c * float(d @ v))

    report = EquivalenceReport(d_err, v_err, f_err, c, obj_err, tol_d, tol_v)
    if d_err > tol_d:
        report.mismatches.append(f"stationary distribution differs by {d_err:.3g}")
    if v_err > tol_v:
        report.mismatches.append(f"values on original states differ by {v_err:.3g}")
    if f_err > tol_v:
        report.mismatches.append(f"hypothetical state values differ from successors by {f_err:.3g}")
    if obj_err > tol_v:
        report.mismatches.append(f"objective identity off by {obj_err:.3g}")
    return report


def lifted_fixed_point(induced: InducedStateMDP, X) -> np.ndarray:
    """TD fixed point of the induced MDP with lifted features, weighted by ``d_bar``."""
    bar = build_matrices(induced.dynamics, induced.task, induced.policy_bar)
    d_bar = stationary_distribution(bar.P_pi)
    return build_system(lambda_operator(bar), bar, induced.lift_features(X), Weighting(d_bar)).solve()


def original_fixed_point(mats: PolicyMatrices, X) -> np.ndarray:
    d = stationary_distribution(mats.P_pi)
    return build_system(lambda_operator(mats), mats, X, Weighting(d)).solve()
