import numpy as np
import pytest

from gatedspad.gating import DetectorRates, GateSchedule

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def table1_rates():
    """PDE 10 %, no background, dark rate 4.4e-5 c/ns."""
    return DetectorRates(p_de=0.1, lambda_b=0.0, lambda_d=4.4e-5)


@pytest.fixture
def schedule100():
    return GateSchedule.from_cycle(tau_g=2.0, tau_cyc=8.0, n_gates=100)


@pytest.fixture
def schedule400():
    return GateSchedule.from_cycle(tau_g=2.0, tau_cyc=8.0, n_gates=400)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
