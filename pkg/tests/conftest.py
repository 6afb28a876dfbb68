import numpy as np
import pytest

from emscat import driver, geometry
from emscat.medium import Medium


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def random_unit(rng, count=1):
    v = rng.normal(size=(count, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


@pytest.fixture(scope="session")
def polycarbonate_size_lambda():
    """Unit sphere with refractive index 1.584 at electromagnetic size 1."""
    return Medium.from_refractive_index(1.584, omega=np.pi)


@pytest.fixture(scope="session")
def unit_sphere():
    return geometry.sphere(1.0)


@pytest.fixture(scope="session")
def z_incidence_h():
    return driver.IncidentWave(direction=np.array([0.0, 0.0, 1.0]),
                               polarization=np.array([1.0, 0.0, 0.0]))
