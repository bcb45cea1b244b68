"""Temperature-dependent per-phase material laws and their derivatives.

Laws are affine in temperature (value = a + b*u) with isotropic
conductivities; the evaluation surface exposes analytic first and second
temperature derivatives so downstream code never has to difference them
numerically.
"""

import hashlib
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import EllipticityError, UnknownPhaseError

PROPERTY_NAMES = ("rho", "c", "k", "sigma")


@dataclass(frozen=True)
class AffineLaw:
    """value(u) = a + b*u"""

    a: float
    b: float

    def __call__(self, u):
        return self.a + self.b * np.asarray(u, dtype=np.float64)

    @property
    def slope(self):
        return self.b


@dataclass(frozen=True)
class PhaseLaws:
    rho: AffineLaw
    c: AffineLaw
    k: AffineLaw
    sigma: AffineLaw


@dataclass(frozen=True)
class CoefficientSample:
    """All coefficients of one phase at one temperature.

    Second derivatives are identically zero for affine laws but are kept in
    the record so higher-order laws can slot in without interface changes.
    """

    rho: float
    c: float
    k: float
    sigma: float
    d1_rho: float
    d1_c: float
    d1_k: float
    d1_sigma: float
    d2_k: float = 0.0
    d2_sigma: float = 0.0


class MaterialLaw:
    """Per-phase affine laws over a configured temperature range."""

    def __init__(self, phases, u_range=(300.0, 400.0)):
        self.phases = tuple(phases)
        self.u_range = (float(u_range[0]), float(u_range[1]))
        # per-phase (a, b) arrays for vectorized element evaluation
        self._a = {name: np.array([getattr(p, name).a for p in self.phases])
                   for name in PROPERTY_NAMES}
        self._b = {name: np.array([getattr(p, name).b for p in self.phases])
                   for name in PROPERTY_NAMES}

    @property
    def n_phases(self):
        return len(self.phases)

    def eval(self, phase, u):
        """Coefficient sample of one phase at temperature u.

        Temperatures outside the configured range only warn: the laws stay
        evaluable, but ellipticity is certified on the range alone.
        """
        if not 0 <= phase < self.n_phases:
            raise UnknownPhaseError(f"phase {phase} not defined")
        lo, hi = self.u_range
        if u < lo or u > hi:
            warnings.warn(f"temperature {u} outside configured range [{lo}, {hi}]",
                          stacklevel=2)
        p = self.phases[phase]
        return CoefficientSample(
            rho=float(p.rho(u)), c=float(p.c(u)), k=float(p.k(u)),
            sigma=float(p.sigma(u)),
            d1_rho=p.rho.b, d1_c=p.c.b, d1_k=p.k.b, d1_sigma=p.sigma.b,
        )

    def property_values(self, name, phase_ids, u):
        """Vectorized a + b*u for one property, by element phase id."""
        a = self._a[name][phase_ids]
        b = self._b[name][phase_ids]
        return a + b * np.asarray(u, dtype=np.float64)

    def property_slopes(self, name, phase_ids):
        return self._b[name][phase_ids]

    def fingerprint(self):
        payload = {
            "u_range": self.u_range,
            "phases": [{name: (getattr(p, name).a, getattr(p, name).b)
                        for name in PROPERTY_NAMES} for p in self.phases],
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def ellipticity_bounds(law, u_range=None):
    """Uniform bounds (gamma0, gamma1) on k and sigma over phases and range.

    Affine laws attain their extrema at the range endpoints.
    """
    lo, hi = u_range if u_range is not None else law.u_range
    if hi < lo:
        raise ValueError("empty temperature range")
    samples = []
    for p in law.phases:
        for u in (lo, hi):
            samples.append(p.k(u))
            samples.append(p.sigma(u))
    gamma0 = float(min(samples))
    gamma1 = float(max(samples))
    if gamma0 <= 0.0:
        raise EllipticityError(
            f"conductivity reaches {gamma0} on [{lo}, {hi}]")
    return gamma0, gamma1


def positivity_check(law, u_range=None):
    """Raise unless rho and c stay positive over the range."""
    lo, hi = u_range if u_range is not None else law.u_range
    worst = min(min(p.rho(lo), p.rho(hi), p.c(lo), p.c(hi))
                for p in law.phases)
    if worst <= 0.0:
        raise EllipticityError("rho or c loses positivity on the range")
    return worst
