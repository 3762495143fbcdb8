import numpy as np
import pytest

from rbmo_lab import build_family, doubling_subfamily, gen_cantor, gen_lebesgue_grid

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def leb1000():
    return gen_lebesgue_grid((0.0, 1.0), 1000)


@pytest.fixture(scope="session")
def leb64():
    return gen_lebesgue_grid((0.0, 1.0), 64)


@pytest.fixture(scope="session")
def cantor8():
    return gen_cantor(8)


@pytest.fixture(scope="session")
def small_setup(leb64):
    """64-atom grid, anchors every 8th atom, 5 ladder levels."""
    fam = build_family(leb64, 2.0 ** -4, 5, anchors=np.arange(0, 64, 8))
    return leb64, fam, doubling_subfamily(leb64, fam, 10.0, 20.0)
