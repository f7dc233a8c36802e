import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from roughflow.grid import SampledPath, TimeGrid

settings.register_profile(
    "roughflow", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("roughflow")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def brownian_path(rng):
    grid = TimeGrid(0.0, 1.0, 129)
    steps = rng.standard_normal((128, 2)) * np.sqrt(grid.step)
    return SampledPath(grid, np.vstack([np.zeros(2), np.cumsum(steps, axis=0)]))


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    if mod is None or not hasattr(mod, "RESULTS"):
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 13):
        ok, detail = mod.RESULTS.get(number, (False, "not run or raised before a verdict"))
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}")
