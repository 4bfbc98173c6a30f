"""Exact value functions, the lambda Bellman operator and control by value iteration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from .core import (
    EnvironmentDynamics,
    Policy,
    PolicyMatrices,
    RLTask,
    StructureError,
    TaskError,
    TerminationError,
    build_matrices,
    check_termination,
)


class NonContractiveError(RuntimeError):
    """Value iteration failed to settle for a control task."""


@dataclass(frozen=True)
class LambdaOperator:
    """Affine operator ``v -> r_lambda + P_lambda v``."""

    P_lambda: np.ndarray
    r_lambda: np.ndarray

    def __call__(self, v):
        return apply_bellman(self, v)


def _solve(M: np.ndarray, B: np.ndarray) -> np.ndarray:
    try:
        lu = linalg.lu_factor(M, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise TerminationError(f"singular system: {exc}") from exc
    if np.any(np.abs(np.diag(lu[0])) < 1e-14):
        raise TerminationError("singular system: discount never terminates")
    return linalg.lu_solve(lu, B)


def exact_value(mats: PolicyMatrices, absorbing=()) -> np.ndarray:
    """Solve ``(I - P_{pi,gamma}) v = r_pi``.

    ``absorbing`` lists zero-reward absorbing states whose value is pinned to
    zero, the classical convention for episodic tasks written with an
    absorbing state and a discount of one.
    """
    n = mats.n_states
    Pg = mats.P_pi_gamma
    keep = np.setdiff1d(np.arange(n), np.asarray(absorbing, dtype=int))
    Pk = Pg[np.ix_(keep, keep)]
    check_termination(Pk)
    v = np.zeros(n)
    v[keep] = _solve(np.eye(len(keep)) - Pk, mats.r_pi[keep])
    return v


def lambda_operator(mats: PolicyMatrices) -> LambdaOperator:
    """``P_lambda = (I - P_{pi,gamma,lambda})^{-1} P_{pi,gamma,1-lambda}``, same inverse on r_pi."""
    check_termination(mats.P_pi_gamma)
    n = mats.n_states
    rhs = np.column_stack([mats.P_pi_gamma_one_minus_lambda, mats.r_pi])
    sol = _solve(np.eye(n) - mats.P_pi_gamma_lambda, rhs)
    return LambdaOperator(P_lambda=sol[:, :n], r_lambda=sol[:, n])


def apply_bellman(op: LambdaOperator, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[0] != op.r_lambda.shape[0]:
        raise StructureError(f"value of length {v.shape[0]} for operator on {op.r_lambda.shape[0]} states")
    return op.r_lambda + op.P_lambda @ v


def action_value_matrices(dyn: EnvironmentDynamics, task: RLTask, policy: Policy) -> PolicyMatrices:
    """Policy matrices on the state-action space, pair ``(s, a)`` at index ``s * A + a``.

    ``P((s,a), (s',a')) = Pr(s,a,s') pi(s',a')`` with the discount and trace of
    the ``(s, a, s')`` transition.
    """
    n, n_a, _ = dyn.shape
    if policy.probs.shape != (n, n_a):
        raise StructureError("policy does not match dynamics")
    task.check(dyn)
    Pr = dyn.transition
    gamma = task.table("discount", dyn.shape)
    lam = task.table("trace", dyn.shape)
    reward = task.table("reward", dyn.shape)
    pi = policy.probs

    # (s,a,s') x pi(s',a') -> ((s,a),(s',a'))
    def lift(w):
        return (w[:, :, :, None] * pi[None, None, :, :]).reshape(n * n_a, n * n_a)

    P = lift(Pr)
    Pg = lift(Pr * gamma)
    Pgl = lift(Pr * gamma * lam)
    r = (Pr * reward).sum(axis=2).reshape(n * n_a)
    return PolicyMatrices(P_pi=P, P_pi_gamma=Pg, P_pi_gamma_lambda=Pgl,
                          P_pi_gamma_one_minus_lambda=Pg - Pgl, r_pi=r)


def _sparse_rows(dyn: EnvironmentDynamics, weights: np.ndarray) -> sparse.csr_matrix:
    n, n_a, _ = dyn.shape
    blocks = []
    for a in range(n_a):
        blocks.append(sparse.csr_matrix(dyn.transition[:, a, :] * weights[:, a, :]))
    # stack so that row s * A + a holds Pr(s, a, .) * weights(s, a, .)
    stacked = sparse.vstack(blocks).tocsr()
    order = (np.arange(n)[:, None] + n * np.arange(n_a)[None, :]).ravel()
    return stacked[order]


def greedy_policy(q: np.ndarray, n_actions: int) -> Policy:
    """Deterministic greedy policy; ties go to the lowest action index."""
    Q = np.asarray(q).reshape(-1, n_actions)
    return Policy.deterministic(np.argmax(Q, axis=1), n_actions)


def control_value_iteration(dyn: EnvironmentDynamics, task: RLTask, tol: float = 1e-12,
                            max_sweeps: int = 1_000_000, q0=None):
    """Optimal action values under transition-based discounting.

    Iterates ``Q(s,a) <- sum_s' Pr(s,a,s') [r(s,a,s') + gamma(s,a,s') max_a' Q(s',a')]``
    until the max-norm change is below ``tol``. Returns the flattened action
    values (index ``s * A + a``) and the greedy policy.
    """
    n, n_a, _ = dyn.shape
    task.check(dyn)
    gamma = task.table("discount", dyn.shape)
    reward = task.table("reward", dyn.shape)
    expected_r = np.zeros(n * n_a)
    for a in range(n_a):
        expected_r[a::n_a] = (dyn.transition[:, a, :] * reward[:, a, :]).sum(axis=1)
    PG = _sparse_rows(dyn, gamma)

    q = np.zeros(n * n_a) if q0 is None else np.array(q0, dtype=float)
    window, last_delta = 1000, None
    for sweep in range(1, max_sweeps + 1):
        v = q.reshape(n, n_a).max(axis=1)
        q_new = expected_r + PG @ v
        delta = np.max(np.abs(q_new - q))
        q = q_new
        if not np.isfinite(delta):
            raise NonContractiveError("non-contractive control task: values became non-finite")
        if delta < tol:
            break
        if sweep % window == 0:
            if last_delta is not None and delta > 0.9999 * last_delta:
                raise NonContractiveError(
                    f"non-contractive control task: change {delta:.3g} not shrinking after {sweep} sweeps"
                )
            last_delta = delta
    else:
        raise NonContractiveError(f"non-contractive control task: no convergence in {max_sweeps} sweeps")
    return q, greedy_policy(q, n_a)


def average_reward_identity(mats: PolicyMatrices, d_pi, gamma_c: float, tol: float = 1e-12):
    """Return ``(d_pi . v_pi, d_pi . r_pi / (1 - gamma_c))``.

    The two agree for a constant discount; the precondition is checked by
    requiring ``P_{pi,gamma} = gamma_c P_pi``.
    """
    if not 0.0 <= gamma_c < 1.0:
        raise TaskError("average-reward identity needs a constant discount below 1")
    if np.max(np.abs(mats.P_pi_gamma - gamma_c * mats.P_pi)) > tol:
        raise TaskError("average-reward identity only holds for a constant discount")
    d = np.asarray(d_pi, dtype=float)
    v = exact_value(mats)
    return float(d @ v), float(d @ mats.r_pi / (1.0 - gamma_c))


def mean_discount_identity(mats: PolicyMatrices, d_pi):
    """``(d_pi . v_pi, d_pi . r_pi / (1 - gamma_bar))`` with ``gamma_bar`` the stationary mean discount.

    For a constant discount this is :func:`average_reward_identity`; with a
    transition-based discount the two sides generally differ.
    """
    d = np.asarray(d_pi, dtype=float)
    gamma_bar = float(d @ mats.P_pi_gamma.sum(axis=1))
    if gamma_bar >= 1.0:
        raise TaskError("stationary mean discount is 1")
    v = exact_value(mats)
    return float(d @ v), float(d @ mats.r_pi / (1.0 - gamma_bar))
