import numpy as np
import pytest

from reactive_rx.params import baseline

FIG2_KB = (0.0, 2e3, 4e3, 1e4, 2e4, 4e4)
FIG3_KD = (0.0, 2e3, 1e4, 2e4, 4e4)


def figure_sets():
    """(label, params) for every parameter set of both reference sweeps."""
    sets = [(f"kb={kb:g}", baseline(k_b=kb)) for kb in FIG2_KB]
    sets += [(f"kb=2e5,kd={kd:g}", baseline(k_b=2e5, k_d=kd)) for kd in FIG3_KD]
    return sets


@pytest.fixture
def base():
    return baseline()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
