import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from iondfs import dfs, observables

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_state(rng, dim=4):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(rng, dim=4, rank=None):
    rank = rank or dim
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def fig1_curve():
    """The full 100-period fidelity run, shared because it takes ~10 s."""
    start = time.perf_counter()
    curve = observables.fig1_fidelity(dfs.psi_e_params())
    curve.metadata["runtime_s"] = time.perf_counter() - start
    return curve


@pytest.fixture(scope="session")
def fig1_curve_half_step():
    return observables.fig1_fidelity(dfs.psi_e_params(), safety=0.01)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[number])
