import numpy as np
import pytest

from stochpe import DomainSpec, Grid


@pytest.fixture(scope="session")
def grid_small():
    """Anisotropic small grid; catches axis-ordering mistakes."""
    return Grid(DomainSpec(L1=2 * np.pi, L2=4.0, h=1.5, N1=3, N2=2, M=3, mu=0.7, nu=0.3))


@pytest.fixture(scope="session")
def grid_cube():
    return Grid(DomainSpec(N1=4, N2=4, M=4))


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
