import time
from pathlib import Path

import pytest

from rangevol.abm_range import AbmParams
from rangevol.mc_oracle import SimConfig, simulate_extremes

import _report

DATA = Path(__file__).parent / "data"
MILLION = 1_000_000


def pytest_terminal_summary(terminalreporter):
    if _report.LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_report.LINES):
            terminalreporter.write_line(_report.LINES[number])


@pytest.fixture(scope="session")
def data_dir():
    return DATA


class TimedSample:
    def __init__(self, params, cfg):
        start = time.perf_counter()
        self.paths = simulate_extremes(params, cfg)
        self.seconds = time.perf_counter() - start
        self.params = params
        self.cfg = cfg


def _sample(mu, sigma, t, seed):
    return TimedSample(AbmParams(mu, sigma, t), SimConfig(n_paths=MILLION, seed=seed))


@pytest.fixture(scope="session")
def driftless_paths():
    """10^6 grid paths of standard Brownian motion on [0, 1], 10^4 steps."""
    return _sample(0.0, 1.0, 1.0, seed=101)


@pytest.fixture(scope="session")
def drifted_paths_long():
    return _sample(0.5, 0.3, 2.0, seed=102)


@pytest.fixture(scope="session")
def half_range_paths():
    return _sample(0.1, 0.2, 1.0, seed=103)


@pytest.fixture(scope="session")
def range_paths():
    return _sample(0.3, 0.25, 1.0, seed=104)


@pytest.fixture(scope="session")
def max_min_paths():
    return _sample(0.2, 0.5, 1.0, seed=105)
