import numpy as np
import pytest

from freesemi import presets


@pytest.fixture(scope="session")
def semicircle1():
    return presets.semicircle(1.0)


@pytest.fixture(scope="session")
def quartic_measure():
    return presets.quartic_critical()


@pytest.fixture(scope="session")
def quartic_potential():
    return presets.quartic_potential()


@pytest.fixture(scope="session")
def k2_measure():
    return presets.monomial_critical(2)


@pytest.fixture(scope="session")
def edge_measure():
    return presets.edge_critical()


@pytest.fixture(scope="session")
def two_atom():
    return presets.two_atom()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
