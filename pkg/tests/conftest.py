import numpy as np
import pytest

from spinpair.baths import Lorentzian, OhmicLorentzDrude, make_profile
from spinpair.core import SystemParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def lorentz():
    return Lorentzian(gamma=1.0, gamma0=1.0)


@pytest.fixture
def ohmic():
    return OhmicLorentzDrude(omega_c=1.0, omega0=1.0)


@pytest.fixture
def params():
    return SystemParams(epsilon=2.0, coupling_K=1.0)


@pytest.fixture
def lorentz_profile(lorentz):
    return make_profile(lorentz)
