"""Incremental TD learners for transition-based discounts and traces.

All learners stage their trace decay: after processing a transition the
trace is multiplied by that transition's ``gamma * lambda`` so the next step
only needs the new transition.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .contraction import WeightedLinearSystem, is_positive_definite
from .core import EnvironmentDynamics, Policy, RLTask


@dataclass(frozen=True)
class Transition:
    s: int
    a: int
    s_next: int
    r: float
    gamma_next: float
    lambda_next: float
    a_next: int = 0
    rho_next: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.rho_next) or self.rho_next < 0:
            raise ValueError("importance ratio must be finite and nonnegative")


@dataclass
class AgentState:
    w: np.ndarray
    e: np.ndarray
    v_old: float = 0.0
    F: float = 0.0
    M: float = 0.0
    A_acc: np.ndarray | None = None
    b_acc: np.ndarray | None = None
    lam_in: float = 0.0  # trace of the transition entering the current pair
    t: int = 0

    @classmethod
    def zeros(cls, d: int, least_squares: bool = False) -> "AgentState":
        st = cls(w=np.zeros(d), e=np.zeros(d))
        if least_squares:
            st.A_acc = np.zeros((d, d))
            st.b_acc = np.zeros(d)
        return st


def td_step(st: AgentState, x, x_next, tr: Transition, alpha: float) -> AgentState:
    """Linear TD(lambda) with accumulating traces."""
    st.e += x
    delta = tr.r + tr.gamma_next * (x_next @ st.w) - x @ st.w
    st.w += alpha * delta * st.e
    st.e *= tr.gamma_next * tr.lambda_next
    st.t += 1
    return st


def true_online_td_step(st: AgentState, x, x_next, tr: Transition, alpha: float) -> AgentState:
    """True-online TD(lambda) with dutch traces; ``v_old`` carries across episode ends."""
    v = st.w @ x
    v_next = st.w @ x_next
    delta = tr.r + tr.gamma_next * v_next - v
    st.e += x
    st.w += alpha * (delta + v - st.v_old) * st.e - alpha * (v - st.v_old) * x
    st.v_old = v_next
    gl = tr.gamma_next * tr.lambda_next
    st.e = gl * st.e - alpha * gl * (st.e @ x_next) * x_next
    st.t += 1
    return st


def elstdq_step(st: AgentState, x, x_next, tr: Transition, interest: float,
                staging: str = "literal") -> AgentState:
    """Accumulate the emphatic LSTDQ(lambda) system for state-action features ``x``.

    ``staging="literal"`` discounts the follow-on trace and mixes the emphasis
    with the discount and trace of the transition leaving ``x``.
    ``staging="emphatic"`` uses those of the transition entering ``x``, which
    makes the expected accumulators equal the emphasis-weighted system
    ``X^T M (I - P_{pi,gamma,lambda})^{-1} (I - P_{pi,gamma}) X``.
    Both share the same eligibility trace.
    """
    g, lam, rho = tr.gamma_next, tr.lambda_next, tr.rho_next
    if staging == "literal":
        st.F = g * st.F + interest
        st.M = lam * interest + (1.0 - lam) * st.F
    elif staging == "emphatic":
        st.F = st.F + interest
        st.M = st.lam_in * interest + (1.0 - st.lam_in) * st.F
    else:
        raise ValueError(f"unknown staging {staging!r}")
    st.e += st.M * x
    st.A_acc += np.outer(st.e, x - rho * g * x_next)
    st.b_acc += st.e * tr.r
    st.e *= g * lam * rho
    # staged follow-on decay for the next step
    st.F *= rho if staging == "literal" else rho * g
    st.lam_in = lam
    st.t += 1
    return st


@dataclass
class Solution:
    w: np.ndarray
    singular: bool


def finalize(st: AgentState) -> Solution:
    """Solve ``A w = b`` from the accumulators; least squares if ``A`` is singular."""
    A, b = st.A_acc, st.b_acc
    try:
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            lu = linalg.lu_factor(A)
        if np.min(np.abs(np.diag(lu[0]))) > 1e-12 * max(1.0, np.abs(A).max()):
            st.w = linalg.lu_solve(lu, b)
            return Solution(st.w.copy(), False)
    except (linalg.LinAlgError, ValueError):
        pass
    st.w = linalg.lstsq(A, b)[0]
    return Solution(st.w.copy(), True)


@dataclass
class IterationResult:
    weights: np.ndarray  # iterates w_0 .. w_T, one per row
    positive_definite: bool

    @property
    def final(self) -> np.ndarray:
        return self.weights[-1]


def expected_etd_iteration(sys: WeightedLinearSystem, w0, alpha, iters: int) -> IterationResult:
    """Expected update ``w <- w + alpha_t (b - A w)``.

    ``alpha`` is a constant or a callable ``t -> alpha_t``. The iteration runs
    even when ``A`` is not positive definite; the flag records the check.
    """
    A, b = sys.A, sys.b
    step = alpha if callable(alpha) else (lambda t, a=float(alpha): a)
    out = np.empty((iters + 1, len(b)))
    out[0] = w = np.array(w0, dtype=float)
    for t in range(iters):
        w = w + step(t) * (b - A @ w)
        out[t + 1] = w
    return IterationResult(out, is_positive_definite(A))


def step_size(a: float = 0.1, tau: float = 1e4):
    """Schedule ``a / (1 + t / tau)``."""
    return lambda t: a / (1.0 + t / tau)


def _sample(cum, u):
    return min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)


def simulate_stream(dyn: EnvironmentDynamics, task: RLTask, behavior: Policy, steps: int, seed: int,
                    target: Policy | None = None, s0: int = 0) -> list[Transition]:
    """Seeded stream of transitions under ``behavior``.

    There are no resets: episode ends show up only as zero discounts.
    ``rho_next`` is ``target / behavior`` at the next state-action pair.
    """
    rng = np.random.default_rng(seed)
    target = behavior if target is None else target
    P_cum = np.cumsum(dyn.transition, axis=2)
    mu_cum = np.cumsum(behavior.probs, axis=1)
    gamma = task.table("discount", dyn.shape)
    lam = task.table("trace", dyn.shape)
    reward = task.table("reward", dyn.shape)
    u = rng.random((steps, 2))
    s = int(s0)
    a = _sample(mu_cum[s], rng.random())
    out = []
    for t in range(steps):
        sp = _sample(P_cum[s, a], u[t, 0])
        ap = _sample(mu_cum[sp], u[t, 1])
        rho = target.probs[sp, ap] / behavior.probs[sp, ap]
        out.append(Transition(s, a, sp, float(reward[s, a, sp]), float(gamma[s, a, sp]),
                              float(lam[s, a, sp]), ap, float(rho)))
        s, a = sp, ap
    return out


AGENTS = {"td": td_step, "true_online": true_online_td_step}


def run_state_agent(kind: str, stream, X, schedule, record_every: int = 0):
    """Run a state-value learner over ``stream``; returns the state and optional checkpoints."""
    X = np.asarray(X, dtype=float)
    step = AGENTS[kind]
    st = AgentState.zeros(X.shape[1])
    curve = []
    for t, tr in enumerate(stream):
        step(st, X[tr.s], X[tr.s_next], tr, schedule(t))
        if record_every and (t + 1) % record_every == 0:
            curve.append((t + 1, st.w.copy()))
    return st, curve


def run_elstdq(stream, X_sa, interest, n_actions: int, staging: str = "literal"):
    """Accumulate ELSTDQ over ``stream`` with pair features ``X_sa[s * A + a]``."""
    X_sa = np.asarray(X_sa, dtype=float)
    interest = np.asarray(interest, dtype=float)
    st = AgentState.zeros(X_sa.shape[1], least_squares=True)
    for tr in stream:
        elstdq_step(st, X_sa[tr.s * n_actions + tr.a], X_sa[tr.s_next * n_actions + tr.a_next], tr,
                    float(interest[tr.s]), staging)
    return st
