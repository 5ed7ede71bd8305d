import numpy as np
import pytest

from picardfem.coefficients import AdmissibleRange, rosseland_model
from picardfem.mesh import unit_interval_mesh, unit_square_mesh


@pytest.fixture
def unit_range():
    return AdmissibleRange(1.0, 2.0)


@pytest.fixture
def rosseland_1d(unit_range):
    return rosseland_model(1.0, 1.0, unit_range, dim=1)


@pytest.fixture
def rosseland_2d(unit_range):
    return rosseland_model(1.0, 1.0, unit_range, dim=2)


@pytest.fixture(params=[1, 2], ids=["1d", "2d"])
def small_mesh(request):
    return unit_interval_mesh(16) if request.param == 1 else unit_square_mesh(6)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)
