"""Effective macroscopic coefficients from first-order corrector fields.

All cell averages use the same element-centroid gradient samples as the
corrector assembly, so the structural identities (symmetry, the equality
of the two electric tensors) hold at the discrete level by Galerkin
orthogonality instead of only in the mesh limit.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidTensorError, ProvenanceError
from .fem import element_gradients

DIM = 2


@dataclass
class HomogenizedCoefficients:
    u0: float
    S_hat: float            # volumetric heat capacity
    k_hat: np.ndarray       # 2x2 thermal conductivity
    sigma_hat: np.ndarray   # 2x2 electric conductivity
    sigma_hat_star: np.ndarray  # Joule-source tensor, equals sigma_hat
    mesh_id: str = ""

    def as_vector(self):
        return np.concatenate([[self.S_hat], self.k_hat.ravel(),
                               self.sigma_hat.ravel(),
                               self.sigma_hat_star.ravel()])

    @classmethod
    def from_vector(cls, u0, vec, mesh_id=""):
        vec = np.asarray(vec, dtype=np.float64)
        return cls(u0=u0, S_hat=float(vec[0]),
                   k_hat=vec[1:5].reshape(2, 2).copy(),
                   sigma_hat=vec[5:9].reshape(2, 2).copy(),
                   sigma_hat_star=vec[9:13].reshape(2, 2).copy(),
                   mesh_id=mesh_id)


def compute_homogenized(mesh, law, u0, m_fields, n_fields):
    """Cell averages of the coefficient integrands at temperature u0.

    ``m_fields``/``n_fields`` are the (2, n_nodes) corrector arrays solved
    at the same temperature on the same mesh.  The Joule-source tensor is
    computed from its own (longer) integrand, never aliased to the electric
    tensor, so their equality stays a meaningful cross-check.
    """
    if m_fields.shape[1] != mesh.n_nodes:
        raise ProvenanceError("corrector fields do not match the cell mesh")
    area = mesh.areas
    total = float(np.sum(area))
    phases = mesh.element_phase
    k_e = law.property_values("k", phases, u0)
    s_e = law.property_values("sigma", phases, u0)
    rho_c = (law.property_values("rho", phases, u0)
             * law.property_values("c", phases, u0))

    s_hat = float(np.sum(area * rho_c)) / total

    grad_m = [element_gradients(mesh, m_fields[a]) for a in range(DIM)]
    grad_n = [element_gradients(mesh, n_fields[a]) for a in range(DIM)]

    k_hat = np.empty((DIM, DIM))
    sig_hat = np.empty((DIM, DIM))
    sig_star = np.empty((DIM, DIM))
    for i in range(DIM):
        for j in range(DIM):
            delta = 1.0 if i == j else 0.0
            k_hat[i, j] = np.sum(area * k_e * (delta + grad_m[j][:, i])) / total
            sig_hat[i, j] = np.sum(area * s_e * (delta + grad_n[j][:, i])) / total
            sig_star[i, j] = np.sum(
                area * s_e * (delta + grad_n[j][:, i] + grad_n[i][:, j]
                              + np.sum(grad_n[i] * grad_n[j], axis=1))) / total

    return HomogenizedCoefficients(
        u0=u0, S_hat=s_hat, k_hat=k_hat, sigma_hat=sig_hat,
        sigma_hat_star=sig_star, mesh_id=mesh.fingerprint()[:16])


@dataclass
class IdentityReport:
    max_rel: float
    tol: float

    @property
    def passed(self):
        return self.max_rel <= self.tol


def check_sigma_star_identity(homog, tol=1e-8):
    """Residual of the sigma-star equality, relative to ||sigma_hat||."""
    scale = float(np.linalg.norm(homog.sigma_hat))
    diff = float(np.max(np.abs(homog.sigma_hat_star - homog.sigma_hat)))
    rel = diff / scale if scale > 0.0 else diff
    return IdentityReport(max_rel=rel, tol=tol)


def tensor_eigenvalues(tensor, sym_tol=1e-8):
    """Closed-form eigenvalues of a symmetric 2x2 tensor."""
    tensor = np.asarray(tensor, dtype=np.float64)
    scale = float(np.max(np.abs(tensor))) or 1.0
    if abs(tensor[0, 1] - tensor[1, 0]) > sym_tol * scale:
        raise InvalidTensorError("tensor is not symmetric")
    mean = 0.5 * (tensor[0, 0] + tensor[1, 1])
    radius = np.hypot(0.5 * (tensor[0, 0] - tensor[1, 1]), tensor[0, 1])
    return mean - radius, mean + radius


def check_ellipticity(homog, bounds, slack=1e-12):
    """Eigenvalues of both tensors against (gamma0, gamma1) bounds."""
    gamma0, gamma1 = bounds
    eigs = {}
    ok = True
    for name, tensor in (("k_hat", homog.k_hat), ("sigma_hat", homog.sigma_hat)):
        lo, hi = tensor_eigenvalues(tensor)
        eigs[name] = (lo, hi)
        if lo < gamma0 - slack * abs(gamma0) or hi > gamma1 + slack * abs(gamma1):
            ok = False
    return ok, eigs
