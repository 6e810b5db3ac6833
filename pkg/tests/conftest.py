import numpy as np
import pytest

from lockrace.equilibrium import solve_equilibrium
from lockrace.model import GameConfig

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def flat_config(nu=1.0):
    return GameConfig.symmetric(4, [1, 3, 3, 3, 3], horizon=8.0, cost_factor=nu)


def steep_config(nu=1.5):
    return GameConfig.symmetric(2, [4, 3, 2, 1], horizon=5.0, cost_factor=nu)


@pytest.fixture(scope="session")
def flat():
    return flat_config()


@pytest.fixture(scope="session")
def steep():
    return steep_config()


@pytest.fixture(scope="session")
def flat_solved(flat):
    return solve_equilibrium(flat)


@pytest.fixture(scope="session")
def steep_solved(steep):
    return solve_equilibrium(steep)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
