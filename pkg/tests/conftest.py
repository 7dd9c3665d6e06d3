import numpy as np
import pytest

from phaseless import Frame

ACCEPTANCE_LINES = []


@pytest.fixture
def fstar():
    return Frame([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


@pytest.fixture
def xstar():
    return np.array([1.0, 0.0])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
