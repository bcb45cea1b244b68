import numpy as np
import pytest

from homte.exceptions import EllipticityError, UnknownPhaseError
from homte.materials import (AffineLaw, MaterialLaw, PhaseLaws,
                             ellipticity_bounds, positivity_check)


def test_matrix_values_at_300(composite_law):
    s = composite_law.eval(0, 300.0)
    assert s.k == pytest.approx(4.12)
    assert s.sigma == pytest.approx(295.5)
    assert s.rho * s.c == pytest.approx(4.5)


def test_affine_second_derivatives_vanish(composite_law):
    assert composite_law.eval(1, 355.0).d2_k == 0.0
    assert composite_law.eval(1, 355.0).d2_sigma == 0.0


def test_unknown_phase(composite_law):
    with pytest.raises(UnknownPhaseError):
        composite_law.eval(2, 300.0)


def test_out_of_range_warns_not_fails(composite_law):
    with pytest.warns(UserWarning):
        s = composite_law.eval(0, 990.0)
    assert s.k == pytest.approx(4.0 + 0.0004 * 990.0)


def test_eval_linear_in_temperature(composite_law):
    a = composite_law.eval(0, 310.0)
    b = composite_law.eval(0, 390.0)
    mid = composite_law.eval(0, 350.0)
    for name in ("rho", "c", "k", "sigma"):
        assert getattr(a, name) + getattr(b, name) == pytest.approx(
            2.0 * getattr(mid, name), rel=1e-14)


def test_derivatives_match_finite_differences(composite_law):
    h = 1e-3
    for phase in (0, 1):
        lo = composite_law.eval(phase, 350.0 - h)
        hi = composite_law.eval(phase, 350.0 + h)
        mid = composite_law.eval(phase, 350.0)
        for name in ("rho", "c", "k", "sigma"):
            fd = (getattr(hi, name) - getattr(lo, name)) / (2.0 * h)
            assert abs(fd - getattr(mid, f"d1_{name}")) < 1e-10


def test_ellipticity_bounds_composite(composite_law):
    g0, g1 = ellipticity_bounds(composite_law, (300.0, 400.0))
    assert g0 == pytest.approx(0.0412)   # inclusion k at the cold end
    assert g1 == pytest.approx(295.5)    # matrix sigma at the cold end


def test_ellipticity_bounds_matrix_only():
    law = MaterialLaw([PhaseLaws(rho=AffineLaw(0.008, 0.0),
                                 c=AffineLaw(562.5, 0.0),
                                 k=AffineLaw(4.0, 0.0004),
                                 sigma=AffineLaw(300.0, -0.015))])
    g0, g1 = ellipticity_bounds(law, (300.0, 400.0))
    assert g1 == pytest.approx(max(4.16, 295.5))
    assert g0 == pytest.approx(4.12)


def test_ellipticity_bounds_unit_material():
    one = AffineLaw(1.0, 0.0)
    law = MaterialLaw([PhaseLaws(rho=one, c=one, k=one, sigma=one)])
    assert ellipticity_bounds(law, (0.0, 10.0)) == (1.0, 1.0)


def test_non_elliptic_law_rejected():
    law = MaterialLaw([PhaseLaws(rho=AffineLaw(1.0, 0.0), c=AffineLaw(1.0, 0.0),
                                 k=AffineLaw(1.0, -0.01),
                                 sigma=AffineLaw(1.0, 0.0))])
    with pytest.raises(EllipticityError):
        ellipticity_bounds(law, (0.0, 200.0))


def test_positivity_check(composite_law):
    assert positivity_check(composite_law, (300.0, 400.0)) > 0.0
    law = MaterialLaw([PhaseLaws(rho=AffineLaw(1.0, -0.01), c=AffineLaw(1.0, 0.0),
                                 k=AffineLaw(1.0, 0.0), sigma=AffineLaw(1.0, 0.0))])
    with pytest.raises(EllipticityError):
        positivity_check(law, (0.0, 200.0))


def test_vectorized_property_values(composite_law):
    phases = np.array([0, 1, 0])
    u = np.array([300.0, 300.0, 400.0])
    k = composite_law.property_values("k", phases, u)
    assert np.allclose(k, [4.12, 0.0412, 4.16])
    assert np.allclose(composite_law.property_slopes("sigma", phases),
                       [-0.015, -0.00001, -0.015])


def test_fingerprint_distinguishes_laws(composite_law, uniform_law):
    assert composite_law.fingerprint() != uniform_law.fingerprint()
    assert composite_law.fingerprint() == composite_law.fingerprint()
