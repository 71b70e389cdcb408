import numpy as np
import pytest

from cascade_opo.model import SystemParams

BASE = dict(gamma1=1.0, gamma2=1.0, gamma3=1.0, kappa1=0.01, kappa2=0.01)


def make_params(eps2=135.0, **changes) -> SystemParams:
    return SystemParams(**{**BASE, **changes}, eps2=eps2)


@pytest.fixture
def below():
    return make_params(135.0)


@pytest.fixture
def above():
    return make_params(225.0)


@pytest.fixture
def omegas():
    return np.linspace(0.0, 6.0, 121)
