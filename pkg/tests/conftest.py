import numpy as np
import pytest

from s1classes.geometry import Domain, grid_avoiding

_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    return _LINES


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def disc():
    return Domain.disc()


@pytest.fixture(scope="session")
def square():
    return Domain.rectangle((0.0, 1.0), (0.0, 1.0))


@pytest.fixture(scope="session")
def disc_grid32(disc):
    return grid_avoiding(disc, 1 / 32)


@pytest.fixture(scope="session")
def disc_grid64(disc):
    return grid_avoiding(disc, 1 / 64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
