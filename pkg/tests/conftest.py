import numpy as np
import pytest

from freshsense.sigmodel import RadioParams, trial_rng

ACCEPTANCE_LINES = []


@pytest.fixture
def radio():
    return RadioParams()


@pytest.fixture
def rng():
    return trial_rng(12345, 0)


def random_buffer(rng, n, fs=102400.0):
    from freshsense.sigmodel import IqBuffer

    return IqBuffer(rng.standard_normal(n) + 1j * rng.standard_normal(n), fs)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
