import numpy as np
import pytest

from demontape.params import Params

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def ref_machine():
    return Params.resolve(sigma=0.3, omega=0.5, gamma=1.0, p0=0.5)


def random_physical(rng, n, gamma=None):
    """Random parameter sets with sigma < omega."""
    out = []
    for _ in range(n):
        omega = rng.uniform(0.05, 0.95)
        sigma = rng.uniform(0.0, 0.999) * omega
        g = rng.uniform(0.2, 3.0) if gamma is None else gamma
        out.append(Params(sigma, omega, g, rng.uniform(-1.0, 1.0)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)
