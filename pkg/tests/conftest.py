import numpy as np
import pytest

from selflow.grids import Grid
from selflow.noise import MagneticField, NoiseOperatorS


@pytest.fixture
def grid32():
    return Grid(32, 32)


@pytest.fixture
def grid_bounded():
    return Grid(32, 32, bc_velocity="noslip", bc_director="neumann")


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def noise32(grid32):
    return NoiseOperatorS(grid32, n_modes=8, sigma0=0.3)


@pytest.fixture
def h_const(grid32):
    return MagneticField.constant(grid32, (0.0, 0.0, 0.5))


def fit_order(errors, hs):
    """Least-squares slope of log(error) against log(h)."""
    e = np.log(np.asarray(errors, dtype=float))
    x = np.log(np.asarray(hs, dtype=float))
    return np.polyfit(x, e, 1)[0]
