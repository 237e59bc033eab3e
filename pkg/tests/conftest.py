import numpy as np
import pytest

from elephantlq.config import ToyScenario
from elephantlq.riccati import solve_riccati

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def toy():
    return ToyScenario()


@pytest.fixture(scope="session")
def toy_coeffs(toy):
    return toy.build(1e-3)


@pytest.fixture(scope="session")
def toy_riccati(toy_coeffs):
    return solve_riccati(toy_coeffs)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
