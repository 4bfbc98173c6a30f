"""Transition-based traces can break contraction under the on-policy weighting.

Two states, one action, uniform transitions and gamma = 0.99. The trace is
0.9 on transitions entering state 0 and 0 on transitions entering state 1.
Under d_pi the lambda operator expands vectors; under the emphasis weighting
it contracts again.

    python demos/counterexample.py
"""
import numpy as np

from rltask import Policy, build_matrices, lambda_operator, stationary_distribution
from rltask.contraction import (
    build_system,
    constant_parameter_bound,
    emphasis_weighting,
    is_positive_definite,
    on_policy_weighting,
    verify_counterexample,
    weighted_norm,
)
from rltask.domains.counterexample import make_counterexample

np.set_printoptions(precision=4, suppress=True)

rep = verify_counterexample()
print("P_lambda =\n", rep.P_lambda)
print(f"row sums {rep.row_sums}, so value still leaks out every step")
print(f"xi(D_pi)   = {rep.xi_d_pi:.4f}   (> 1: not a contraction)")
print(f"xi(M)      = {rep.xi_emphasis:.4f}   (emphasis restores contraction)")
print(f"constant lambda = 0.9 gives xi(D_pi) = {rep.xi_constant_trace:.4f} "
      f"<= {constant_parameter_bound(0.99, 0.9):.4f}")

# the same operator seen through TD's linear system, with a single feature
dyn, task = make_counterexample()
pi = Policy.uniform(2, 1)
mats = build_matrices(dyn, task.replace(reward=np.array([1.0, -1.0])[None, None, :]), pi)
op = lambda_operator(mats)
d = stationary_distribution(mats.P_pi)
X = np.array([[1.0], [2.0]])
for name, w in (("d_pi", on_policy_weighting(d)), ("emphasis", emphasis_weighting(op, d, 1.0))):
    sys = build_system(op, mats, X, w)
    print(f"{name:9s} A = {sys.A.item():+.4f}  positive definite: {is_positive_definite(sys.A)}")

# expansion is visible directly: find the direction that grows most
root = np.sqrt(d)
_, _, vt = np.linalg.svd(root[:, None] * op.P_lambda / root[None, :])
v = vt[0] / root
growth = np.sqrt(d @ (op.P_lambda @ v) ** 2) / np.sqrt(d @ v ** 2)
print(f"worst direction {v / np.abs(v).max()} grows by {growth:.4f} per application")
print(f"weighted norm check: {weighted_norm(op.P_lambda, d):.4f}")
