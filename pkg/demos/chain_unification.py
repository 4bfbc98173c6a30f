"""One value function, four ways to write the same episodic chain.

Moving right from s3 ends the episode. With a transition-based discount the
chain needs no extra states: the s3 -> s1 transition just has discount 0. The
state-based version either adds an absorbing or a hypothetical state, or puts
the zero discount on s1 and gets a different answer.

    python demos/chain_unification.py
"""
import numpy as np

from rltask import build_matrices, exact_value
from rltask.domains.chain import KINDS, chain_policy, make_chain
from rltask.equivalence import induce_state_based, verify_equivalence

for p_right in (1.0, 0.75):
    print(f"\npi(right) = {p_right}")
    for kind in KINDS:
        dyn, task = make_chain(kind)
        mats = build_matrices(dyn, task, chain_policy(kind, p_right))
        v = exact_value(mats, absorbing=(3,) if kind == "absorbing" else ())
        print(f"  {kind:24s} v(s1..s3) = {np.round(v[:3], 4)}")

# the general construction: every transition gets its own state
dyn, task = make_chain("transition_based")
pi = chain_policy("transition_based", 0.75)
induced = induce_state_based(dyn, task, pi)
rep = verify_equivalence(dyn, task, pi, induced)
print(f"\ninduced state-based MDP has {induced.n_states} states")
for key, val in rep.as_dict().items():
    print(f"  {key}: {val}")
