import math
import warnings

import pytest

from weakmeas.phase_grid import DIMENSIONLESS, UnitSystem, make_grid
from weakmeas.quantum_state import make_test_state


@pytest.fixture(scope="session")
def grid512():
    return make_grid(-8.0, 8.0, 512)


@pytest.fixture(scope="session")
def dimensioned_grid():
    return make_grid(-16.0, 16.0, 512)


@pytest.fixture(scope="session")
def two_peak(grid512):
    return make_test_state("two_peak", grid512, sep=3.0, momentum=0.2)


@pytest.fixture(scope="session")
def gaussian(grid512):
    return make_test_state("gaussian", grid512, center=0.4, width=1.3, momentum=-0.3)


@pytest.fixture(scope="session")
def units_b1():
    return UnitSystem.dimensioned(1.0)


@pytest.fixture(autouse=True)
def _strict_runtime_warnings():
    # numerical RuntimeWarnings (overflow, invalid) should fail loudly
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        yield
