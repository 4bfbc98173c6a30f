"""Soft versus hard termination in the taxi with turning costs.

The pickup transition ends the pickup subtask. A hard termination (discount 0)
makes the agent ignore what happens after pickup, so it arrives facing the
wrong way. A soft termination (discount 0.1) lets a little of the delivery
cost leak back. A state-based discount cannot express either and the agent
never delivers.

    python demos/taxi.py [runs]
"""
import sys

import numpy as np

from rltask import RLTask
from rltask.bellman import control_value_iteration
from rltask.domains.taxi import build_taxi, greedy_route, simulate_greedy, taxi_discount

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
taxi, dyn, R, _ = build_taxi()
print(f"{taxi.n_states} states, {taxi.n_actions} actions")

for k, variant in enumerate(("trans_soft", "trans_hard", "state_based")):
    _, pol = control_value_iteration(dyn, RLTask(reward=R, discount=taxi_discount(taxi, variant)))
    actions = np.argmax(pol.probs, axis=1)
    route = greedy_route(taxi, actions)
    deliveries, turn = simulate_greedy(taxi, actions, runs, 100, seed=k)
    print(f"\n{variant}")
    print("  route:", " ".join(str(r) for r in route))
    print(f"  per 100 steps over {runs} runs: {deliveries.mean():.2f} drop-offs, turn cost {turn.mean():.2f}")
