"""Weighted operator norms, emphatic weighting and TD fixed-point systems."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import svds

from .bellman import LambdaOperator, _solve, exact_value, lambda_operator
from .core import PolicyMatrices, StructureError, build_matrices, check_termination, stationary_distribution

WEIGHTING_KINDS = ("on_policy_d_pi", "behavior_interest", "emphasis_M")
PD_TOL = 1e-10


class NotContractionError(ValueError):
    """The weighted norm of the lambda operator is not below one."""


@dataclass(frozen=True)
class Weighting:
    """Diagonal state weighting ``D = diag(d)``."""

    d: np.ndarray
    kind: str = "on_policy_d_pi"

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 1:
            raise StructureError("weighting must be a vector")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("weighting must be finite and nonnegative")
        if self.kind not in WEIGHTING_KINDS:
            raise ValueError(f"unknown weighting kind {self.kind!r}")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)


@dataclass(frozen=True)
class WeightedLinearSystem:
    """TD fixed point ``A w = b`` for features ``X`` under a weighting."""

    A: np.ndarray
    b: np.ndarray
    weighting: Weighting
    features: np.ndarray

    def solve(self) -> np.ndarray:
        return linalg.solve(self.A, self.b)


def on_policy_weighting(d_pi) -> Weighting:
    return Weighting(d_pi, "on_policy_d_pi")


def behavior_interest_weighting(d_mu, interest) -> Weighting:
    return Weighting(np.asarray(d_mu) * np.asarray(interest), "behavior_interest")


def emphasis_vector(op: LambdaOperator, d_mu, interest) -> np.ndarray:
    """Emphasis ``m`` solving ``m^T (I - P_lambda) = (d_mu * i)^T``."""
    n = op.P_lambda.shape[0]
    target = np.asarray(d_mu, dtype=float) * np.broadcast_to(np.asarray(interest, dtype=float), (n,))
    return _solve((np.eye(n) - op.P_lambda).T, target)


def emphasis_weighting(op: LambdaOperator, d_mu, interest) -> Weighting:
    m = emphasis_vector(op, d_mu, interest)
    m = np.where(np.abs(m) < 1e-15, 0.0, m)
    return Weighting(np.clip(m, 0.0, None), "emphasis_M")


def weighted_norm(M, w: Weighting | np.ndarray) -> float:
    """Induced norm ``max ||M v||_D / ||v||_D``.

    Computed as the largest singular value of ``D^{1/2} M D^{-1/2}`` on the
    support of ``d``; states with zero weight are dropped.
    """
    d = w.d if isinstance(w, Weighting) else np.asarray(w, dtype=float)
    M = np.asarray(M, dtype=float)
    if M.shape != (d.shape[0], d.shape[0]):
        raise StructureError(f"matrix {M.shape} does not match weighting of length {d.shape[0]}")
    support = d > 0
    if not support.any():
        raise ValueError("weighting vector is zero")
    if not support.all():
        M = M[np.ix_(support, support)]
        d = d[support]
    root = np.sqrt(d)
    B = root[:, None] * M / root[None, :]
    if B.shape[0] <= 400:
        return float(linalg.svdvals(B)[0])
    # only the top singular value is needed for the large taxi matrices
    s = svds(B, k=1, which="LM", return_singular_vectors=False, tol=1e-12,
             v0=np.full(B.shape[0], 1.0 / np.sqrt(B.shape[0])))
    return float(s[0])


def d_norm(v, d) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.sum(np.asarray(d) * v * v)))


def build_system(op: LambdaOperator, mats: PolicyMatrices, X, w: Weighting) -> WeightedLinearSystem:
    """``A = X^T D (I - P_{pi,gamma,lambda})^{-1} (I - P_{pi,gamma}) X``, ``b = X^T D (I - P_{pi,gamma,lambda})^{-1} r_pi``."""
    X = np.asarray(X, dtype=float)
    n = mats.n_states
    if X.ndim != 2 or X.shape[0] != n:
        raise StructureError(f"features must have {n} rows, got {X.shape}")
    if w.d.shape[0] != n:
        raise StructureError("weighting does not match the number of states")
    check_termination(mats.P_pi_gamma)
    rhs = np.column_stack([(np.eye(n) - mats.P_pi_gamma) @ X, mats.r_pi])
    sol = _solve(np.eye(n) - mats.P_pi_gamma_lambda, rhs)
    DX = X * w.d[:, None]
    k = X.shape[1]
    return WeightedLinearSystem(A=DX.T @ sol[:, :k], b=DX.T @ sol[:, k], weighting=w, features=X)


def is_positive_definite(A, tol: float = PD_TOL) -> bool:
    """True iff the symmetric part of ``A`` has minimum eigenvalue above ``tol``."""
    A = np.asarray(A, dtype=float)
    sym = 0.5 * (A + A.T)
    return bool(linalg.eigvalsh(sym)[0] > tol)


def constant_parameter_bound(gamma_c: float, lambda_c: float) -> float:
    """Upper bound ``gamma (1 - lambda) / (1 - gamma lambda)`` on the D_pi norm for constant parameters."""
    return gamma_c * (1.0 - lambda_c) / (1.0 - gamma_c * lambda_c)


def approximation_error_bound(xi: float, projection_error: float) -> float:
    """Bound ``||v - v*||_D <= projection_error / (1 - xi)`` on the projected fixed point."""
    if xi >= 1.0:
        raise NotContractionError(f"not a contraction: weighted norm {xi:.6g} >= 1")
    return projection_error / (1.0 - xi)


def projected_fixed_point(op: LambdaOperator, X, d) -> np.ndarray:
    """Weights of the fixed point ``v = Pi_D T v`` with ``v = X w``."""
    X = np.asarray(X, dtype=float)
    DX = X * np.asarray(d)[:, None]
    A = DX.T @ (X - op.P_lambda @ X)
    b = DX.T @ op.r_lambda
    return linalg.solve(A, b)


def projection(X, d, z) -> np.ndarray:
    """D-weighted least-squares projection of ``z`` onto the span of ``X``."""
    X = np.asarray(X, dtype=float)
    DX = X * np.asarray(d)[:, None]
    return X @ linalg.solve(DX.T @ X, DX.T @ z)


def discount_mass_constants(mats: PolicyMatrices, d_pi) -> tuple[float, float]:
    """Tightest ``s_lambda``, ``s_{1-lambda}`` with ``d P v <= s d v`` for all ``v >= 0``.

    Over nonnegative ``v`` the ratio is extremal on coordinate vectors, so the
    constant is ``max_j (d P)_j / d_j``.
    """
    d = np.asarray(d_pi, dtype=float)
    pos = d > 0

    def tight(P):
        return float(np.max((d @ P)[pos] / d[pos]))

    return tight(mats.P_pi_gamma_lambda), tight(mats.P_pi_gamma_one_minus_lambda)


def mixed_trace_bound(mats: PolicyMatrices, d_pi) -> float:
    """``B = s_{1-lambda} / (1 - s_lambda)`` with ``d P_lambda v <= B d v`` for ``v >= 0``.

    This bounds weighted mass, not the norm itself: since the rows of
    ``P_lambda`` sum to at most one, Jensen gives ``xi(D_pi) <= sqrt(B)``.
    """
    s_lam, s_one_minus = discount_mass_constants(mats, d_pi)
    if s_lam >= 1.0:
        return float("inf")
    return s_one_minus / (1.0 - s_lam)


@dataclass
class CounterexampleReport:
    P_lambda: np.ndarray
    xi_d_pi: float
    xi_emphasis: float
    xi_constant_trace: float
    row_sums: np.ndarray
    s_lambda: float
    s_one_minus_lambda: float
    mixed_bound: float
    expected_P_lambda: np.ndarray = field(
        default_factory=lambda: np.array([[0.0893, 0.8927], [0.0893, 0.8927]]))

    @property
    def max_entry_error(self) -> float:
        return float(np.max(np.abs(self.P_lambda - self.expected_P_lambda)))

    @property
    def passed(self) -> bool:
        return self.max_entry_error <= 5e-4 and self.xi_d_pi > 1.0 and self.xi_emphasis < 1.0

    def as_dict(self) -> dict:
        return {
            "P_lambda": self.P_lambda.tolist(),
            "max_entry_error": self.max_entry_error,
            "xi_d_pi": self.xi_d_pi,
            "xi_emphasis": self.xi_emphasis,
            "xi_constant_trace": self.xi_constant_trace,
            "row_sums": self.row_sums.tolist(),
            "s_lambda": self.s_lambda,
            "s_one_minus_lambda": self.s_one_minus_lambda,
            "mixed_bound": self.mixed_bound,
            "passed": self.passed,
        }


def verify_counterexample(interest=1.0) -> CounterexampleReport:
    """Two-state MDP whose lambda operator expands in the D_pi norm but contracts under emphasis."""
    from .domains.counterexample import make_counterexample
    from .core import Policy

    dyn, task = make_counterexample()
    pi = Policy.uniform(2, dyn.n_actions)
    mats = build_matrices(dyn, task, pi)
    d = stationary_distribution(mats.P_pi)
    op = lambda_operator(mats)
    xi_d = weighted_norm(op.P_lambda, on_policy_weighting(d))
    xi_m = weighted_norm(op.P_lambda, emphasis_weighting(op, d, interest))
    const_mats = build_matrices(dyn, task.replace(trace=0.9), pi)
    xi_c = weighted_norm(lambda_operator(const_mats).P_lambda, on_policy_weighting(d))
    s_lam, s_one = discount_mass_constants(mats, d)
    return CounterexampleReport(
        P_lambda=op.P_lambda,
        xi_d_pi=xi_d,
        xi_emphasis=xi_m,
        xi_constant_trace=xi_c,
        row_sums=op.P_lambda.sum(axis=1),
        s_lambda=s_lam,
        s_one_minus_lambda=s_one,
        mixed_bound=mixed_trace_bound(mats, d),
    )


def contraction_report(dyn, task, policy, X=None, behavior=None, interest=None) -> dict:
    """Norms of the lambda operator under each weighting plus definiteness of A."""
    target = build_matrices(dyn, task, policy)
    d_pi = stationary_distribution(target.P_pi)
    if behavior is None:
        d_mu = d_pi
    else:
        d_mu = stationary_distribution(build_matrices(dyn, task, behavior).P_pi)
    i = task.interest_vector(dyn.n_states) if interest is None else np.broadcast_to(interest, (dyn.n_states,))
    op = lambda_operator(target)
    X = np.eye(dyn.n_states) if X is None else X
    out = {}
    for name, w in (
        ("d_pi", on_policy_weighting(d_pi)),
        ("behavior", behavior_interest_weighting(d_mu, i)),
        ("emphasis", emphasis_weighting(op, d_mu, i)),
    ):
        xi = weighted_norm(op.P_lambda, w)
        system = build_system(op, target, X, w)
        out[name] = {"xi": xi, "contraction": xi < 1.0, "A_positive_definite": is_positive_definite(system.A)}
    return out
