import numpy as np
import pytest

from periodica.cell import make_cell
from periodica.kernels import laplace_periodic_ewald, synthetic_power_kernel, yukawa_periodic


@pytest.fixture(scope="session")
def cell2():
    return make_cell([1.0, 1.0])


@pytest.fixture(scope="session")
def cell3():
    return make_cell([1.0, 1.0, 1.0])


@pytest.fixture(scope="session")
def ewald3(cell3):
    return laplace_periodic_ewald(cell3)


@pytest.fixture(scope="session")
def yukawa3(cell3):
    return yukawa_periodic(cell3, 2.0)


@pytest.fixture(scope="session")
def synth2(cell2):
    return synthetic_power_kernel(cell2, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
