"""TD learners on a stream with no resets.

Episode ends appear only as zero discounts, so one long stream serves both
the episodic chain and a continuing task. Each learner is compared with the
fixed point of its own linear system. Single iterates stay noisy at these
step sizes, so the average of the iterates over the second half is shown too.

    python demos/learning.py
"""
import numpy as np

from rltask import build_matrices, lambda_operator, stationary_distribution
from rltask.agents import finalize, run_elstdq, run_state_agent, simulate_stream, step_size
from rltask.bellman import action_value_matrices, exact_value
from rltask.contraction import build_system, d_norm, on_policy_weighting
from rltask.domains.chain import chain_policy, make_chain

dyn, base = make_chain("transition_based")
pi = chain_policy("transition_based", 0.75)

for lam in (0.0, 0.5, 1.0):
    task = base.replace(trace=lam)
    mats = build_matrices(dyn, task, pi)
    d = stationary_distribution(mats.P_pi)
    # a single shared feature for s2 and s3 makes the fixed point depend on lambda
    X = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    w_star = build_system(lambda_operator(mats), mats, X, on_policy_weighting(d)).solve()
    stream = simulate_stream(dyn, task, pi, 100_000, seed=1)
    print(f"\nlambda = {lam}: fixed point {np.round(w_star, 3)}, true v {np.round(exact_value(mats), 3)}")
    for kind in ("td", "true_online"):
        st, curve = run_state_agent(kind, stream, X, step_size(0.1, 1e3), record_every=100)
        errs = " ".join(f"{d_norm(X @ (w - w_star), d):.3f}" for t, w in curve if t % 25_000 == 0)
        w_bar = np.mean([w for t, w in curve if t > 50_000], axis=0)
        print(f"  {kind:12s} error at 25k..100k steps: {errs}   averaged: {d_norm(X @ (w_bar - w_star), d):.3f}")
    qm = action_value_matrices(dyn, task, pi)
    for staging in ("literal", "emphatic"):
        sol = finalize(run_elstdq(stream, np.eye(6), np.ones(3), 2, staging))
        print(f"  elstdq {staging:9s} max |q_hat - q| = {np.abs(sol.w - exact_value(qm)).max():.3f}")
