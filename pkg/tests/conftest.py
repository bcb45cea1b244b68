import numpy as np
import pytest

from homte.materials import AffineLaw, MaterialLaw, PhaseLaws


@pytest.fixture(scope="session")
def composite_law():
    """Two-phase packaging composite: conductive matrix, weak inclusion."""
    return MaterialLaw([
        PhaseLaws(rho=AffineLaw(0.008, 0.0), c=AffineLaw(562.5, 0.0),
                  k=AffineLaw(4.0, 0.0004), sigma=AffineLaw(300.0, -0.015)),
        PhaseLaws(rho=AffineLaw(0.002, 0.0), c=AffineLaw(750.0, 0.0),
                  k=AffineLaw(0.04, 0.000004), sigma=AffineLaw(0.075, -0.00001)),
    ], u_range=(300.0, 400.0))


@pytest.fixture(scope="session")
def uniform_law():
    """Both phases identical: the composite degenerates to one material."""
    phase = PhaseLaws(rho=AffineLaw(0.008, 0.0), c=AffineLaw(562.5, 0.0),
                      k=AffineLaw(4.0, 0.0004), sigma=AffineLaw(300.0, -0.015))
    return MaterialLaw([phase, phase], u_range=(300.0, 400.0))


@pytest.fixture(scope="session")
def constant_law():
    """Temperature-independent two-phase laws (all slopes zero)."""
    return MaterialLaw([
        PhaseLaws(rho=AffineLaw(0.008, 0.0), c=AffineLaw(562.5, 0.0),
                  k=AffineLaw(4.0, 0.0), sigma=AffineLaw(300.0, 0.0)),
        PhaseLaws(rho=AffineLaw(0.002, 0.0), c=AffineLaw(750.0, 0.0),
                  k=AffineLaw(0.04, 0.0), sigma=AffineLaw(0.075, 0.0)),
    ], u_range=(300.0, 400.0))


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
