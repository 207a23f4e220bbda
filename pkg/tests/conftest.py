import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qemlab import CellPartition, NoiseKernel, active_cells, assemble, build_map

settings.register_profile(
    "qemlab", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("qemlab")

GOLDEN_RATE = (1.0 + np.sqrt(5.0)) / 4.0


@pytest.fixture(scope="session")
def golden_benchmark():
    """Doubling map with the golden-mean hole [3/4, 1), res 4096, eps 1e-3."""
    m = build_map("doubling", hole=[(0.75, 1.0)])
    p = CellPartition(m.state_space, 4096)
    op = assemble(m, NoiseKernel(1e-3), None, p, active=active_cells(m, p))
    return m, p, op


def random_substochastic(rng, n, positive=True):
    Q = rng.random((n, n)) + (0.01 if positive else 0.0)
    return Q / Q.sum(axis=1, keepdims=True) * rng.uniform(0.3, 1.0, (n, 1))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
