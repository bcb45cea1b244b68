"""Microscale corrector problems on the unit cell at a fixed temperature.

Every problem is an elliptic solve with a phase-wise constant conductivity
(thermal k or electric sigma, frozen at the representative temperature)
and a right-hand side built from previously computed quantities.  Boundary
handling is either homogeneous Dirichlet (the default used by production
runs) or true periodicity via DOF identification; periodic solutions are
returned as the zero-mean representative.

The two corrector families that multiply a single macroscopic gradient in
the second-order expansion contain derivatives of the slow variable.  They
are realized as two-index families: the extra index carries the chain-rule
factor (the gradient of the macroscopic temperature), and the right-hand
sides use temperature derivatives of the local/effective coefficients and
of the first-order correctors.  A toggle drops these families entirely.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from . import fem
from .exceptions import IncompatibleRhsError, ProvenanceError
from .mesh import boundary_nodes

DIM = 2

TWO_INDEX_FIELDS = ("M2", "R2", "H", "G", "N2", "Z2", "W")


@dataclass
class CellFunctionSet:
    """Every corrector field at one representative temperature.

    Single-index families have shape (2, n_nodes); Q is (n_nodes,); the
    two-index families are (2, 2, n_nodes), all on the shared cell mesh.
    """

    u0: float
    bc_mode: str
    mesh_id: str
    M: np.ndarray
    N: np.ndarray
    Q: np.ndarray
    M2: np.ndarray
    R2: np.ndarray
    H: np.ndarray
    G: np.ndarray
    N2: np.ndarray
    Z2: np.ndarray
    W: np.ndarray

    def flat_fields(self):
        """Name -> 1D nodal array, a stable flattening used for persistence."""
        out = {}
        for alpha in range(DIM):
            out[f"M_{alpha}"] = self.M[alpha]
            out[f"N_{alpha}"] = self.N[alpha]
        out["Q"] = self.Q
        for name in TWO_INDEX_FIELDS:
            arr = getattr(self, name)
            for a1 in range(DIM):
                for a2 in range(DIM):
                    out[f"{name}_{a1}{a2}"] = arr[a1, a2]
        return out

    @classmethod
    def from_flat(cls, u0, bc_mode, mesh_id, fields):
        n = len(fields["Q"])
        kw = {
            "M": np.stack([fields[f"M_{a}"] for a in range(DIM)]),
            "N": np.stack([fields[f"N_{a}"] for a in range(DIM)]),
            "Q": fields["Q"],
        }
        for name in TWO_INDEX_FIELDS:
            arr = np.empty((DIM, DIM, n))
            for a1 in range(DIM):
                for a2 in range(DIM):
                    arr[a1, a2] = fields[f"{name}_{a1}{a2}"]
            kw[name] = arr
        return cls(u0=u0, bc_mode=bc_mode, mesh_id=mesh_id, **kw)


FLAT_FIELD_NAMES = tuple(
    [f"M_{a}" for a in range(DIM)] + [f"N_{a}" for a in range(DIM)] + ["Q"]
    + [f"{name}_{a1}{a2}" for name in TWO_INDEX_FIELDS
       for a1 in range(DIM) for a2 in range(DIM)])


class CellOperator:
    """Constrained, factorized elliptic operator reused for many loads."""

    def __init__(self, mesh, coeff, bc_mode="dirichlet", compat_tol=1e-6):
        self.mesh = mesh
        self.bc_mode = bc_mode
        self.compat_tol = compat_tol
        # assembly-roundoff scale: loads below this are treated as zero by
        # the compatibility check (their solves are noise either way)
        self.compat_floor = (1e-12 * mesh.n_nodes
                             * max(1.0, float(np.max(np.abs(coeff)))))
        matrix = fem.assemble_stiffness(mesh, coeff)
        zeros = np.zeros(mesh.n_nodes)
        if bc_mode == "periodic":
            self.pmap = fem.PeriodicMap(mesh)
            reduced, _ = self.pmap.reduce(matrix, zeros)
            constrained, _ = fem.apply_dirichlet(
                reduced, np.zeros(self.pmap.n_reduced),
                np.array([self.pmap.pinned]), np.array([0.0]))
        elif bc_mode == "dirichlet":
            self.pmap = None
            self.fixed = np.asarray(boundary_nodes(mesh), dtype=np.int64)
            constrained, _ = fem.apply_dirichlet(
                matrix, zeros, self.fixed, np.zeros(len(self.fixed)))
        else:
            raise ValueError(f"unknown bc_mode {bc_mode!r}")
        self.lu = spla.splu(constrained.tocsc())

    def solve(self, rhs, compat_tol=None):
        if self.pmap is not None:
            tol = self.compat_tol if compat_tol is None else compat_tol
            reduced = self.pmap.matrix.T @ rhs
            total = float(np.sum(reduced))
            scale = float(np.linalg.norm(reduced))
            if abs(total) > tol * scale + self.compat_floor:
                raise IncompatibleRhsError(
                    f"periodic rhs mean {total:.3e} exceeds {tol} * ||rhs||")
            # project out the constant component so pinning stays consistent
            reduced = reduced - total / len(reduced)
            reduced[self.pmap.pinned] = 0.0
            full = self.pmap.expand(self.lu.solve(reduced))
            return full - fem.p1_mean(self.mesh, full)
        b = rhs.copy()
        b[self.fixed] = 0.0
        return self.lu.solve(b)


def solve_cell_problem(mesh, coeff, rhs, bc_mode="dirichlet", compat_tol=1e-6):
    """One corrector solve; prefer :class:`CellOperator` for batches."""
    return CellOperator(mesh, coeff, bc_mode, compat_tol).solve(rhs)


def _centroid_values(mesh, nodal):
    return np.asarray(nodal)[mesh.elements].mean(axis=1)


def _unit_rhs(mesh, coeff_e, alpha):
    """Weak rhs of the first-order problem: v -> -integral coeff * dv/dy_alpha."""
    g = np.zeros((mesh.n_elements, 2))
    g[:, alpha] = -coeff_e
    return fem.assemble_weak_div(mesh, g)


def solve_first_order(mesh, law, u0, bc_mode="dirichlet", operators=None):
    """First-order correctors: M (thermal) and N (electric), both directions."""
    phases = mesh.element_phase
    k_e = law.property_values("k", phases, u0)
    s_e = law.property_values("sigma", phases, u0)
    op_k, op_s = operators if operators is not None else (
        CellOperator(mesh, k_e, bc_mode), CellOperator(mesh, s_e, bc_mode))
    m = np.stack([op_k.solve(_unit_rhs(mesh, k_e, a)) for a in range(DIM)])
    n = np.stack([op_s.solve(_unit_rhs(mesh, s_e, a)) for a in range(DIM)])
    return m, n


@dataclass
class TemperatureDerivatives:
    """d/du of first-order correctors and effective tensors at one knot.

    Produced by differencing neighbouring table entries; consumed by the
    chain-ruled two-index corrector problems.
    """

    dM: np.ndarray        # (2, n_nodes)
    dN: np.ndarray
    d_k_hat: np.ndarray   # (2, 2)
    d_sigma_hat: np.ndarray


def solve_second_order(mesh, law, u0, first_order, homog,
                       derivatives: Optional[TemperatureDerivatives] = None,
                       bc_mode="dirichlet", operators=None,
                       include_gradient_families=True):
    """All second-order correctors at one representative temperature.

    ``first_order`` is the (M, N) pair solved at the same temperature on the
    same mesh; ``homog`` the effective coefficients from those fields.  The
    two-index gradient families need ``derivatives``; they are returned as
    zeros when disabled or when no derivative data is supplied.
    """
    m_fields, n_fields = first_order
    if abs(homog.u0 - u0) > 1e-9 * max(1.0, abs(u0)):
        raise ProvenanceError("effective coefficients belong to a different "
                              "temperature than the requested cell solve")
    if include_gradient_families and derivatives is None:
        raise ProvenanceError("gradient corrector families requested but no "
                              "temperature derivatives supplied")

    phases = mesh.element_phase
    k_e = law.property_values("k", phases, u0)
    s_e = law.property_values("sigma", phases, u0)
    dk_e = law.property_slopes("k", phases)
    ds_e = law.property_slopes("sigma", phases)
    rho_c_e = (law.property_values("rho", phases, u0)
               * law.property_values("c", phases, u0))

    op_k, op_s = operators if operators is not None else (
        CellOperator(mesh, k_e, bc_mode), CellOperator(mesh, s_e, bc_mode))

    grad_m = [fem.element_gradients(mesh, m_fields[a]) for a in range(DIM)]
    grad_n = [fem.element_gradients(mesh, n_fields[a]) for a in range(DIM)]
    mbar = [_centroid_values(mesh, m_fields[a]) for a in range(DIM)]
    nbar = [_centroid_values(mesh, n_fields[a]) for a in range(DIM)]

    n_nodes = mesh.n_nodes
    q = op_k.solve(-fem.assemble_load(mesh, rho_c_e - homog.S_hat))

    m2 = np.zeros((DIM, DIM, n_nodes))
    h = np.zeros((DIM, DIM, n_nodes))
    g_cell = np.zeros((DIM, DIM, n_nodes))
    n2 = np.zeros((DIM, DIM, n_nodes))
    w = np.zeros((DIM, DIM, n_nodes))
    r2 = np.zeros((DIM, DIM, n_nodes))
    z2 = np.zeros((DIM, DIM, n_nodes))

    for a1 in range(DIM):
        for a2 in range(DIM):
            delta = 1.0 if a1 == a2 else 0.0

            f_plain = (homog.k_hat[a1, a2] - k_e * delta
                       - k_e * grad_m[a2][:, a1])
            gvec = np.zeros((mesh.n_elements, 2))
            gvec[:, a1] = -k_e * mbar[a2]
            m2[a1, a2] = op_k.solve(-fem.assemble_load(mesh, f_plain)
                                    + fem.assemble_weak_div(mesh, gvec))

            f_plain = (homog.sigma_hat[a1, a2] - s_e * delta
                       - s_e * grad_n[a2][:, a1])
            gvec = np.zeros((mesh.n_elements, 2))
            gvec[:, a1] = -s_e * nbar[a2]
            n2[a1, a2] = op_s.solve(-fem.assemble_load(mesh, f_plain)
                                    + fem.assemble_weak_div(mesh, gvec))

            gvec = -(mbar[a1] * dk_e)[:, None] * grad_m[a2]
            gvec[:, a2] -= mbar[a1] * dk_e
            h[a1, a2] = op_k.solve(fem.assemble_weak_div(mesh, gvec))

            gvec = -(mbar[a1] * ds_e)[:, None] * grad_n[a2]
            gvec[:, a2] -= mbar[a1] * ds_e
            w[a1, a2] = op_s.solve(fem.assemble_weak_div(mesh, gvec))

            f_plain = (homog.sigma_hat_star[a1, a2] - s_e * delta
                       - s_e * grad_n[a1][:, a2] - s_e * grad_n[a2][:, a1]
                       - s_e * np.sum(grad_n[a1] * grad_n[a2], axis=1))
            g_cell[a1, a2] = op_k.solve(-fem.assemble_load(mesh, f_plain))

            if include_gradient_families:
                # differenced derivative data satisfies the zero-mean
                # compatibility only up to the differencing error, so these
                # two solves check it against a looser threshold
                d = derivatives
                grad_dm = fem.element_gradients(mesh, d.dM[a1])
                f_plain = (d.d_k_hat[a2, a1] - dk_e * delta
                           - dk_e * grad_m[a1][:, a2]
                           - k_e * grad_dm[:, a2])
                gvec = np.zeros((mesh.n_elements, 2))
                gvec[:, a2] = -k_e * _centroid_values(mesh, d.dM[a1])
                r2[a1, a2] = op_k.solve(-fem.assemble_load(mesh, f_plain)
                                        + fem.assemble_weak_div(mesh, gvec),
                                        compat_tol=1e-3)

                grad_dn = fem.element_gradients(mesh, d.dN[a1])
                f_plain = (d.d_sigma_hat[a2, a1] - ds_e * delta
                           - ds_e * grad_n[a1][:, a2]
                           - s_e * grad_dn[:, a2])
                gvec = np.zeros((mesh.n_elements, 2))
                gvec[:, a2] = -s_e * _centroid_values(mesh, d.dN[a1])
                z2[a1, a2] = op_s.solve(-fem.assemble_load(mesh, f_plain)
                                        + fem.assemble_weak_div(mesh, gvec),
                                        compat_tol=1e-3)

    return CellFunctionSet(
        u0=u0, bc_mode=bc_mode, mesh_id=mesh.fingerprint()[:16],
        M=m_fields, N=n_fields, Q=q, M2=m2, R2=r2, H=h, G=g_cell,
        N2=n2, Z2=z2, W=w)


def mean_report(mesh, cell_set):
    """Cell-average of every field; a diagnostic, not an enforced constraint.

    Periodic solves are shifted to zero mean; Dirichlet solves generally
    have small but non-zero means.
    """
    return {name: fem.p1_mean(mesh, values)
            for name, values in cell_set.flat_fields().items()}
