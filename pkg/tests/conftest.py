import numpy as np
import pytest

from ultrafast.grid import build_grid
from ultrafast.weights import equilibrium, make_weight


def problem(kind, n, L=None, weight="uniform", r=2.0, **params):
    grid = build_grid(kind, n, L)
    w = make_weight(grid, weight, **params)
    return grid, w, equilibrium(w, r)


@pytest.fixture(scope="session")
def uniform_periodic():
    return problem("periodic1d", 64)


@pytest.fixture(scope="session")
def gaussian_1d():
    return problem("truncated1d", 300, 9.0, "quadratic", sigma=1.0)


@pytest.fixture(scope="session")
def power_1d():
    return problem("truncated1d", 300, 12.0, "power", alpha=1.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number].line())
