import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rltask.bellman import control_value_iteration, exact_value
from rltask.core import Policy, RLTask, build_matrices, stationary_distribution
from rltask.domains.chain import KINDS, LEFT, RIGHT, chain_policy, lifted_chain_features, make_chain
from rltask.domains.taxi import (
    DROPOFF,
    EAST,
    NORTH,
    PICKUP,
    PLATFORMS,
    REFERENCE_START,
    SOUTH,
    WEST,
    TaxiSpec,
    greedy_route,
    simulate_greedy,
    taxi_discount,
    wall_collision_discount,
)
from rltask.domains.terminations import TerminationPattern, apply_random_termination, path_property
from rltask.random_tasks import random_task

# ---- chain


@pytest.mark.parametrize("kind", KINDS)
def test_chain_builds(kind):
    dyn, task = make_chain(kind)
    task.check(dyn)
    assert chain_policy(kind).n_states == dyn.n_states


def test_unknown_chain_kind():
    with pytest.raises(ValueError):
        make_chain("bogus")


def test_chain_moves():
    dyn, _ = make_chain("transition_based")
    assert dyn.transition[0, LEFT, 0] == 1 and dyn.transition[1, RIGHT, 2] == 1
    assert dyn.transition[2, RIGHT, 0] == 1


@pytest.mark.parametrize("kind", ["transition_based", "state_based_augmented"])
def test_chain_formulations_agree(kind):
    pi = chain_policy(kind, 0.75)
    dyn, task = make_chain(kind)
    v = exact_value(build_matrices(dyn, task, pi))[:3]
    ref_dyn, ref_task = make_chain("absorbing")
    ref = exact_value(build_matrices(ref_dyn, ref_task, chain_policy("absorbing", 0.75)), absorbing=(3,))[:3]
    assert np.allclose(v, ref, atol=1e-9)
    # hand solution: v3 = -1 + 0.25 v2, v2 = -1 + 0.75 v3 + 0.25 v1, v1 = -1 + 0.75 v2 + 0.25 v1
    A = np.array([[0.75, -0.75, 0.0], [-0.25, 1.0, -0.75], [0.0, -0.25, 1.0]])
    assert np.allclose(v, np.linalg.solve(A, -np.ones(3)), atol=1e-9)


def test_incorrect_state_based_chain_differs():
    dyn, task = make_chain("state_based_incorrect")
    v = exact_value(build_matrices(dyn, task, chain_policy("state_based_incorrect", 0.75)))
    assert np.allclose(v, [-2.615385, -2.153846, -1.538462], atol=1e-6)


def test_lifted_chain_features():
    X3 = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(lifted_chain_features("state_based_augmented", X3)[3], X3[0])
    assert lifted_chain_features("transition_based", X3).shape == (3, 2)


# ---- taxi


def test_taxi_size(taxi_parts):
    taxi, dyn, R, C = taxi_parts
    assert taxi.n_states == dyn.n_states == 2000
    assert dyn.n_actions == 6
    assert TaxiSpec().n_states == 2000


def test_index_round_trip(taxi_parts):
    taxi = taxi_parts[0]
    for s in (0, 17, 999, 1999):
        assert taxi.index(*taxi.decode(s)) == s


def test_pickup_semantics(taxi_parts):
    taxi = taxi_parts[0]
    s = taxi.index(4, 4, 3, 2, EAST)
    [(p, sp, r, tc, ev)] = taxi.outcomes(s, PICKUP)
    assert ev == "pickup" and r == 0 and taxi.decode(sp) == (4, 4, 4, 2, EAST)
    # wrong location: reward -1, state unchanged
    s = taxi.index(3, 4, 3, 2, EAST)
    assert taxi.outcomes(s, PICKUP) == [(1.0, s, -1.0, 0.0, None)]


def test_dropoff_starts_new_episode(taxi_parts):
    taxi = taxi_parts[0]
    s = taxi.index(3, 0, 4, 2, SOUTH)
    outs = taxi.outcomes(s, DROPOFF)
    assert len(outs) == 12 and sum(o[0] for o in outs) == pytest.approx(1.0)
    for _, sp, r, _, ev in outs:
        x, y, p, d, h = taxi.decode(sp)
        assert ev == "dropoff" and r == 0 and (x, y, h) == (3, 0, SOUTH) and p != d and p < 4
    wrong = taxi.index(0, 0, 4, 2, SOUTH)
    assert taxi.outcomes(wrong, DROPOFF) == [(1.0, wrong, -1.0, 0.0, None)]


def test_walls_and_borders(taxi_parts):
    taxi = taxi_parts[0]
    assert not taxi.move_target(2, 0, EAST)[2]
    assert not taxi.move_target(3, 1, WEST)[2]
    assert not taxi.move_target(1, 4, EAST)[2]
    assert taxi.move_target(2, 2, EAST)[2]
    assert not taxi.move_target(4, 4, NORTH)[2]
    s = taxi.index(2, 0, 0, 1, NORTH)
    assert taxi.outcomes(s, EAST) == [(1.0, s, -1.0, 0.0, "blocked")]


def test_turn_costs(taxi_parts):
    taxi = taxi_parts[0]
    assert taxi.turn_cost(NORTH, NORTH, False) == 0
    assert taxi.turn_cost(NORTH, EAST, False) == 0.05
    assert taxi.turn_cost(NORTH, WEST, False) == 0.1
    assert taxi.turn_cost(NORTH, SOUTH, True) == 0.4
    [(_, sp, r, tc, _)] = taxi.outcomes(taxi.index(2, 2, 0, 1, NORTH), WEST)
    assert r == pytest.approx(-1.1) and taxi.decode(sp)[4] == WEST


def test_discount_variants(taxi_parts):
    taxi = taxi_parts[0]
    s = taxi.index(*PLATFORMS[1], 1, 0, NORTH)
    assert taxi_discount(taxi, "trans_soft")[s, PICKUP, 0] == 0.1
    assert taxi_discount(taxi, "trans_hard")[s, PICKUP, 0] == 0.0
    assert taxi_discount(taxi, "trans_hard")[s, NORTH, 0] == 0.99
    gs = taxi_discount(taxi, "state_based")[0, 0]
    assert gs[taxi.index(0, 0, 4, 2, NORTH)] == 0.0
    assert gs[taxi.index(3, 0, 4, 2, NORTH)] == 0.99
    assert gs[taxi.index(0, 0, 1, 2, NORTH)] == 0.99
    const = taxi_discount(type(taxi)(TaxiSpec(discount_variant="constant", gamma_c=0.9)))
    assert const.shape == (1, 1, 1) and const[0, 0, 0] == 0.9
    with pytest.raises(ValueError):
        TaxiSpec(discount_variant="constant")


def test_wall_collision_discount(taxi_parts):
    taxi, dyn = taxi_parts[0], taxi_parts[1]
    g = wall_collision_discount(taxi)
    s = taxi.index(2, 0, 0, 1, NORTH)
    assert g[s, EAST, 0] == 0 and g[s, NORTH, 0] == 1 and g[s, PICKUP, 0] == 1
    # zero discount exactly on movement transitions that leave the state unchanged
    stay = np.einsum("sas->sa", dyn.transition)[:, :4] == 1
    assert np.array_equal(g[:, :4, 0] == 0, stay)


def test_wall_collision_prediction_is_probability(taxi_parts):
    taxi, dyn = taxi_parts[0], taxi_parts[1]
    g = wall_collision_discount(taxi)
    task = RLTask(reward=(1 - g) * 1.0, discount=g)
    v = exact_value(build_matrices(dyn, task, Policy.uniform(dyn.n_states, dyn.n_actions)))
    assert v.min() > 0 and v.max() <= 1 + 1e-9


def test_uniform_stationary_distribution(taxi_parts, taxi_uniform_d):
    taxi = taxi_parts[0]
    d = taxi_uniform_d
    assert d.sum() == pytest.approx(1.0)
    # entering (2, 3) heading east would cross the wall on its west side
    assert d[taxi.index(*REFERENCE_START)] == 0
    assert d[taxi.index(2, 3, 3, 2, NORTH)] > 0
    # a waiting passenger never has its own platform as destination
    same = [s for s in range(taxi.n_states) if taxi.decode(s)[2] == taxi.decode(s)[3]]
    assert len(same) == 400 and not d[same].any()
    # a car cannot face north in the bottom row: it could only have come from below
    assert not d[[taxi.index(x, 0, p, q, NORTH) for x in range(5) for p in range(5) for q in range(4)]].any()


def test_simulation_is_seeded(taxi_parts):
    taxi = taxi_parts[0]
    actions = np.full(taxi.n_states, EAST)
    a = simulate_greedy(taxi, actions, 10, 20, 3)
    b = simulate_greedy(taxi, actions, 10, 20, 3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not a[0].any()


@pytest.fixture(scope="module")
def greedy(taxi_parts):
    taxi, dyn, R, _ = taxi_parts
    out = {}
    for variant in ("trans_soft", "trans_hard", "state_based"):
        _, pol = control_value_iteration(dyn, RLTask(reward=R, discount=taxi_discount(taxi, variant)))
        out[variant] = np.argmax(pol.probs, axis=1)
    return out


def test_hard_route(taxi_parts, greedy):
    route = greedy_route(taxi_parts[0], greedy["trans_hard"])
    assert route == [(3, 3), (4, 3), (4, 4), "Pickup", (3, 4), (3, 3), (3, 2), (3, 1), (3, 0)]


def test_soft_route_delivers_along_east_column(taxi_parts, greedy):
    route = greedy_route(taxi_parts[0], greedy["trans_soft"])
    assert route[2:] == [(4, 4), "Pickup", (4, 3), (4, 2), (4, 1), (4, 0), (3, 0)]


def test_state_based_agent_stalls_after_pickup(taxi_parts, greedy):
    route = greedy_route(taxi_parts[0], greedy["state_based"])
    assert route[-2:] == ["Pickup", "..."]
    deliveries, _ = simulate_greedy(taxi_parts[0], greedy["state_based"], 50, 100, 0)
    assert not deliveries.any()


# ---- random terminations


def test_pattern_validation():
    with pytest.raises(ValueError):
        TerminationPattern("nope")
    with pytest.raises(ValueError):
        TerminationPattern(fraction=1.5)
    assert TerminationPattern(fraction=0.01).count(2000) == 20
    assert TerminationPattern(fraction=0.1).count(2000) == 200


def test_zero_fraction_is_identity():
    rt = random_task(0)
    task, sel = apply_random_termination(rt.dynamics, rt.task, TerminationPattern(fraction=0.0), 0)
    assert task is rt.task and sel.size == 0


def _sparse_task(seed, n=12):
    rng = np.random.default_rng(seed)
    P = np.zeros((n, 2, n))
    for s in range(n):
        for a in range(2):
            nxt = rng.choice(n, size=2, replace=False)
            P[s, a, nxt] = 0.5
    from rltask.core import EnvironmentDynamics

    return EnvironmentDynamics(P), RLTask(reward=0.0, discount=0.9)


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from(["single_path", "all_paths"]))
def test_selected_states_reach_termination(seed, mode):
    dyn, task = _sparse_task(seed)
    new, sel = apply_random_termination(dyn, task, TerminationPattern(mode, 0.25), seed)
    assert sel.size == 3
    gamma = new.table("discount", dyn.shape)
    assert np.all((gamma == 0) | (gamma == 0.9))
    for s in sel:
        some, every = path_property(dyn, new, int(s))
        assert some
        if mode == "all_paths":
            assert every


def test_path_property_examples():
    dyn, task = _sparse_task(1)
    assert path_property(dyn, task, 0) == (False, False)
    assert path_property(dyn, task.replace(discount=0.0), 0) == (True, True)


def test_termination_is_seeded(taxi_parts):
    dyn = taxi_parts[1]
    _, task = make_chain("transition_based")
    from rltask.domains.taxi import make_taxi

    _, taxi_task = make_taxi(TaxiSpec(discount_variant="trans_hard"))
    p = TerminationPattern("single_path", 0.01)
    t1, s1 = apply_random_termination(dyn, taxi_task, p, 5)
    t2, s2 = apply_random_termination(dyn, taxi_task, p, 5)
    assert np.array_equal(s1, s2) and np.array_equal(t1.discount, t2.discount)
    assert (t1.discount == 0).sum() > (taxi_task.discount == 0).sum()
