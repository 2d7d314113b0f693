import numpy as np
import pytest

from conelab.cone_geometry import make_cone
from conelab.radial_calculus import OperatorSpec


@pytest.fixture(scope="session")
def simons():
    return make_cone(3, 3)


@pytest.fixture(scope="session")
def c24():
    return make_cone(2, 4)


@pytest.fixture(scope="session")
def laplace():
    return OperatorSpec.laplace()


@pytest.fixture(scope="session")
def jacobi():
    return OperatorSpec.jacobi()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
