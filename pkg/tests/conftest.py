import functools

import numpy as np
import pytest

from blackband.model import FUTURES, black_band
from blackband.series import OBS_PER_YEAR
from blackband.sim import SimConfig, SimPath, simulate_array, to_price_series

# Futures parameters with sigma^2 implied by a 1% daily volatility.
FUTURES_SIM = FUTURES.with_sigma2(black_band(FUTURES, 0.01).sigma2)


@functools.lru_cache(maxsize=None)
def sim_pool(params=FUTURES_SIM, years=30, n_paths=200, seed=1, frequency="daily", drift=0.05):
    """Simulated pool of price series, cached across tests."""
    opy = OBS_PER_YEAR[frequency]
    cfg = SimConfig(params, 1.0 / opy, years * opy, n_paths=n_paths, seed=seed)
    arr = simulate_array(cfg)
    start = "1960-01-04" if frequency == "daily" else "1900-01-01"
    return tuple(
        to_price_series(SimPath(arr[i], cfg.dt, cfg.digest(), i), start, frequency, base_drift=drift)
        for i in range(n_paths)
    )


@pytest.fixture(scope="session")
def futures_pool():
    return sim_pool()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# One line per acceptance criterion, echoed after the test summary.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
