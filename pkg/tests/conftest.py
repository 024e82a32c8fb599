import sys

import pytest

from ultranet.core import EpsilonLadder, GevreyOrder, Grid
from ultranet.mollifier import default_mollifier, mollifier_net


@pytest.fixture(scope="session")
def s2():
    return GevreyOrder(2.0)


@pytest.fixture(scope="session")
def ladder():
    return EpsilonLadder.geometric(2, 10)


@pytest.fixture(scope="session")
def grid1():
    return Grid(1, 8.0, 4096)


@pytest.fixture(scope="session")
def mnet1(s2, ladder, grid1):
    """Mollifier net on the standard 1D grid (eps = 1/4 .. 1/64 after truncation)."""
    return mollifier_net(default_mollifier(s2, 1), ladder, grid1)


@pytest.fixture(scope="session")
def grid2():
    return Grid(2, 2.0, 512)


@pytest.fixture(scope="session")
def mnet2(s2, grid2):
    return mollifier_net(default_mollifier(s2, 2), EpsilonLadder.geometric(2, 5), grid2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
