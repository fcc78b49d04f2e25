import numpy as np
import pytest

from vqcpulse import GrapeConfig, HamiltonianSpec, build_analytic_library


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def spec1():
    return HamiltonianSpec(1)


@pytest.fixture(scope="session")
def spec2():
    return HamiltonianSpec(2, edges=((0, 1),))


@pytest.fixture(scope="session")
def fast_grape():
    """Converges quickly on easy 1-2 qubit targets; used by unit tests."""
    return GrapeConfig(learning_rate=0.05, decay_rate=0.999, max_iterations=1500, rng_seed=11)


@pytest.fixture(scope="session")
def analytic_library(spec2):
    return build_analytic_library(spec2)
