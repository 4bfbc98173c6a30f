import numpy as np
import pytest
from hypothesis import settings

from rltask.core import Policy, build_matrices
from rltask.domains.taxi import TaxiSpec, build_taxi

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def taxi_parts():
    """``(taxi, dyn, R, C)`` for the default taxi; built once per session."""
    return build_taxi(TaxiSpec())


@pytest.fixture(scope="session")
def taxi_uniform_d(taxi_parts):
    from rltask.core import RLTask, stationary_distribution
    from rltask.domains.taxi import taxi_discount

    taxi, dyn, R, _ = taxi_parts
    task = RLTask(reward=R, discount=taxi_discount(taxi, "trans_hard"))
    pi = Policy.uniform(dyn.n_states, dyn.n_actions)
    return stationary_distribution(build_matrices(dyn, task, pi).P_pi)


def random_features(rng, n, k):
    """Full column rank ``n x k`` features."""
    while True:
        X = rng.normal(size=(n, k))
        if np.linalg.matrix_rank(X) == k:
            return X


ACCEPTANCE: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
