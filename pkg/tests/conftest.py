import pytest

from landau_blowup.grid import build_grid
from landau_blowup.weights import build_family

from helpers import ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def grid():
    return build_grid(30.0, 1024, "graded")


@pytest.fixture(scope="session")
def grid512():
    return build_grid(30.0, 512, "graded")


@pytest.fixture(scope="session")
def family(grid):
    return build_family(grid, 4)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
