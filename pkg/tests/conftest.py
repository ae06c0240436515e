import numpy as np
import pytest

from thermoloop.model import SystemParams

X0 = np.array([-8.0, -6.0, 5.0, 3.0, 7.0, 11.0, 10.0, -10.0, 2.0])


@pytest.fixture
def base_params():
    """Adaptive-scenario parameters, p = 10."""
    return SystemParams(R=(35.0, 45.0, 38.0), gamma=(0.1, 0.3, 0.2), eta=(0.1, 0.1, 0.2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_params(rng, r_lo=30.0, r_hi=60.0) -> SystemParams:
    return SystemParams(
        R=tuple(rng.uniform(r_lo, r_hi, 3)),
        gamma=tuple(rng.uniform(0.02, 0.95, 3)),
        eta=tuple(rng.uniform(0.02, 0.95, 3)),
        p=float(rng.uniform(2.0, 20.0)),
    )


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
