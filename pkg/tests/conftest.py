import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ridge_mml.data import StandardizedDesign, load_builtin, prepare_design

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_RESULTS = {}


def make_design(seed, n=20, p=5, noise=0.5):
    from oracles import random_problem

    X, y = random_problem(np.random.default_rng(seed), n, p, noise)
    return StandardizedDesign.from_arrays(X, y)


@pytest.fixture
def design_factory():
    return make_design


@pytest.fixture(scope="session")
def iris_design():
    return prepare_design(load_builtin("iris"))


@pytest.fixture(scope="session")
def diabetes_q_design():
    return prepare_design(load_builtin("diabetes_q"))


@pytest.fixture
def record_acceptance():
    def record(number, title, passed, detail=""):
        ACCEPTANCE_RESULTS[number] = (title, passed, detail)
        print(f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(
            f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
