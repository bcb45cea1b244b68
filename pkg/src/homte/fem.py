"""P1 finite element building blocks shared by every solve in the package.

Coefficients are per-element constants (one-point centroid quadrature);
boundary fluxes use a three-point Gauss rule per edge.  Dirichlet
conditions are applied by symmetric elimination so systems stay SPD for
the iterative solver.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .exceptions import (EllipticityError, IncompatibleRhsError, SolverError,
                         UnknownMarkerError)
from .kernels import gradient_accumulate, mass_data, stiffness_data, stiffness_data_tensor

# 3-point Gauss rule on [0, 1]
_EDGE_XI = np.array([0.5 * (1.0 - np.sqrt(0.6)), 0.5, 0.5 * (1.0 + np.sqrt(0.6))])
_EDGE_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


@dataclass
class NodalField:
    values: np.ndarray
    mesh_id: str = ""


@dataclass
class SparseSystem:
    """Assembled linear system plus the constraints to apply at solve time."""

    matrix: sparse.csr_matrix
    rhs: np.ndarray
    dirichlet: Optional[tuple] = None     # (node indices, values)
    periodic: Optional["PeriodicMap"] = None
    mesh_id: str = ""


def _coo_pattern(mesh):
    tris = mesh.elements
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    return rows, cols


def _to_csr(mesh, data):
    rows, cols = _coo_pattern(mesh)
    n = mesh.n_nodes
    return sparse.coo_matrix((data.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_stiffness(mesh, coeff):
    """Stiffness matrix for a per-element conductivity.

    ``coeff`` is either a scalar, an (E,) array (isotropic) or an (E, 3)
    array of symmetric tensor entries (t11, t12, t22).
    """
    area, b, c = mesh.geometry()
    coeff = np.asarray(coeff, dtype=np.float64)
    if coeff.ndim == 0:
        coeff = np.full(mesh.n_elements, float(coeff))
    if coeff.ndim == 1:
        if np.any(coeff <= 0.0):
            raise EllipticityError("non-positive conductivity in assembly")
        data = stiffness_data(b, c, area, np.ascontiguousarray(coeff))
    else:
        t11 = np.ascontiguousarray(coeff[:, 0])
        t12 = np.ascontiguousarray(coeff[:, 1])
        t22 = np.ascontiguousarray(coeff[:, 2])
        det = t11 * t22 - t12 * t12
        if np.any(t11 <= 0.0) or np.any(det <= 0.0):
            raise EllipticityError("non-definite conductivity tensor in assembly")
        data = stiffness_data_tensor(b, c, area, t11, t12, t22)
    return _to_csr(mesh, data)


def assemble_mass(mesh, weight):
    """Consistent mass matrix for a per-element scalar weight."""
    area, _, _ = mesh.geometry()
    weight = np.asarray(weight, dtype=np.float64)
    if weight.ndim == 0:
        weight = np.full(mesh.n_elements, float(weight))
    if np.any(weight <= 0.0):
        raise EllipticityError("non-positive mass weight in assembly")
    return _to_csr(mesh, mass_data(area, np.ascontiguousarray(weight)))


def _element_values(mesh, source):
    if callable(source):
        source = source(mesh.centroids)
    source = np.asarray(source, dtype=np.float64)
    if source.ndim == 0:
        return np.full(mesh.n_elements, float(source))
    if source.shape != (mesh.n_elements,):
        raise ValueError("source must be scalar, callable, or one value "
                         "per element")
    return source


def assemble_load(mesh, source=None, neumann=None):
    """Weak-form load vector: volumetric source plus tagged boundary fluxes.

    ``source`` may be a constant, a callable of centroid coordinates or an
    (E,) element array.  ``neumann`` maps side tags to flux callables.
    """
    load = np.zeros(mesh.n_nodes)
    if source is not None:
        s = _element_values(mesh, source)
        area = mesh.areas
        per_node = area * s / 3.0
        np.add.at(load, mesh.elements[:, 0], per_node)
        np.add.at(load, mesh.elements[:, 1], per_node)
        np.add.at(load, mesh.elements[:, 2], per_node)
    if neumann:
        edge_tags = {tag for _, _, tag in mesh.boundary_edges}
        for tag, flux in neumann.items():
            if tag not in edge_tags:
                raise UnknownMarkerError(f"no boundary edges tagged {tag!r}")
            for p, q, etag in mesh.boundary_edges:
                if etag != tag:
                    continue
                xp = mesh.nodes[p]
                xq = mesh.nodes[q]
                length = float(np.hypot(*(xq - xp)))
                pts = xp[None, :] + _EDGE_XI[:, None] * (xq - xp)[None, :]
                g = np.asarray(flux(pts), dtype=np.float64)
                load[p] += length * float(np.sum(_EDGE_W * g * (1.0 - _EDGE_XI)))
                load[q] += length * float(np.sum(_EDGE_W * g * _EDGE_XI))
    return load


def assemble_weak_div(mesh, gvec):
    """Load vector of v -> integral of g . grad(v), g per-element (E, 2).

    This is how divergence-form right-hand sides are assembled: the
    coefficient field is never differentiated across phase jumps.
    """
    _, b, c = mesh.geometry()
    gvec = np.asarray(gvec, dtype=np.float64)
    load = np.zeros(mesh.n_nodes)
    contrib = 0.5 * (gvec[:, 0][:, None] * b + gvec[:, 1][:, None] * c)
    np.add.at(load, mesh.elements[:, 0], contrib[:, 0])
    np.add.at(load, mesh.elements[:, 1], contrib[:, 1])
    np.add.at(load, mesh.elements[:, 2], contrib[:, 2])
    return load


def p1_integral(mesh, values):
    """Exact integral of a P1 nodal field."""
    v = np.asarray(values)[mesh.elements]
    return float(np.sum(mesh.areas * v.mean(axis=1)))


def p1_mean(mesh, values):
    return p1_integral(mesh, values) / float(np.sum(mesh.areas))


def apply_dirichlet(matrix, rhs, nodes, values):
    """Symmetric elimination: zero rows/columns, identity diagonal.

    Returns (A, b) with prescribed values moved to the right-hand side, so
    the constrained system stays symmetric positive definite.
    """
    n = matrix.shape[0]
    nodes = np.asarray(nodes, dtype=np.int64)
    values = np.broadcast_to(np.asarray(values, dtype=np.float64), nodes.shape)
    mask = np.zeros(n, dtype=bool)
    mask[nodes] = True
    lifted = np.zeros(n)
    lifted[nodes] = values
    b = rhs - matrix @ lifted
    keep = sparse.diags((~mask).astype(np.float64))
    pin = sparse.diags(mask.astype(np.float64))
    a = (keep @ matrix @ keep + pin).tocsr()
    b = np.where(mask, lifted, b)
    return a, b


class PeriodicMap:
    """Opposite-face DOF identification on a structured mesh.

    Right-face nodes are identified with left-face nodes and top with
    bottom; the corner quadruple collapses to the origin node.  Solving in
    the reduced space fixes the constant mode by pinning the origin DOF;
    callers shift the expanded solution to zero mean afterwards.
    """

    def __init__(self, mesh):
        g = mesh.grid
        if g is None:
            raise ValueError("periodic identification needs a structured mesh")
        n = g.n
        stride = n + 1
        node_ix = np.arange(mesh.n_nodes) % stride
        node_iy = np.arange(mesh.n_nodes) // stride
        mx = np.where(node_ix == n, 0, node_ix)
        my = np.where(node_iy == n, 0, node_iy)
        rep = my * stride + mx
        reps, inverse = np.unique(rep, return_inverse=True)
        self.mesh = mesh
        self.n_reduced = len(reps)
        self.reduced_index = inverse
        self.matrix = sparse.csr_matrix(
            (np.ones(mesh.n_nodes), (np.arange(mesh.n_nodes), inverse)),
            shape=(mesh.n_nodes, self.n_reduced))
        self.pinned = int(inverse[0])

    def reduce(self, matrix, rhs):
        a = (self.matrix.T @ matrix @ self.matrix).tocsr()
        return a, self.matrix.T @ rhs

    def expand(self, reduced_values):
        return self.matrix @ reduced_values


def _solve_spd(matrix, rhs, tol, maxiter, method, direct_limit):
    n = matrix.shape[0]
    if method == "auto":
        method = "direct" if n <= direct_limit else "pcg"
    if method == "direct":
        try:
            lu = spla.splu(matrix.tocsc())
            x = lu.solve(rhs)
        except RuntimeError as exc:
            raise SolverError(f"direct factorization failed: {exc}") from exc
        scale = float(np.linalg.norm(rhs))
        if scale > 0.0:
            res = float(np.linalg.norm(rhs - matrix @ x)) / scale
            if not np.isfinite(res) or res > max(tol, 1e-9):
                raise SolverError("singular or ill-conditioned system",
                                  residual=res)
        elif not np.all(np.isfinite(x)):
            raise SolverError("singular constrained system")
        return x
    diag = matrix.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError("non-positive diagonal; system not SPD")
    precond = sparse.diags(1.0 / diag)
    x, info = spla.cg(matrix, rhs, rtol=tol, atol=0.0, maxiter=maxiter, M=precond)
    if info != 0:
        res = float(np.linalg.norm(rhs - matrix @ x) / max(np.linalg.norm(rhs), 1e-300))
        raise SolverError(f"pcg failed to converge within {maxiter} iterations",
                          residual=res)
    return x


def solve_system(system, tol=1e-10, maxiter=20000, method="auto",
                 direct_limit=150000, compat_tol=1e-6):
    """Solve an assembled system under its Dirichlet or periodic constraints.

    Returns a :class:`NodalField`.  Periodic solves reject right-hand sides
    whose constant component exceeds ``compat_tol`` relative to the load
    norm, then project the remainder out before pinning one DOF.
    """
    a, b = system.matrix, system.rhs
    if system.periodic is not None:
        pm = system.periodic
        a, b = pm.reduce(a, b)
        total = float(np.sum(b))
        scale = float(np.linalg.norm(b))
        # absolute floor keeps roundoff-level (all but zero) loads legal
        if abs(total) > compat_tol * scale + 1e-12:
            raise IncompatibleRhsError(
                f"rhs mean component {total:.3e} exceeds {compat_tol} * ||rhs||")
        b = b - total / len(b)
        a, b = apply_dirichlet(a, b, np.array([pm.pinned]), np.array([0.0]))
        x = _solve_spd(a, b, tol, maxiter, method, direct_limit)
        full = pm.expand(x)
        full = full - p1_mean(pm.mesh, full)
        return NodalField(values=full, mesh_id=system.mesh_id)
    if system.dirichlet is not None:
        nodes, values = system.dirichlet
        a, b = apply_dirichlet(a, b, nodes, values)
    x = _solve_spd(a, b, tol, maxiter, method, direct_limit)
    if system.dirichlet is not None:
        nodes, values = system.dirichlet
        x[np.asarray(nodes, dtype=np.int64)] = values
    return NodalField(values=x, mesh_id=system.mesh_id)


def recover_gradient(mesh, values):
    """Nodal gradient: area-weighted average of element gradients."""
    vals = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    area, b, c = mesh.geometry()
    return gradient_accumulate(mesh.elements, b, c, area, vals, mesh.n_nodes)


def element_gradients(mesh, values):
    """Constant gradient of the P1 field on each element, shape (E, 2)."""
    area, b, c = mesh.geometry()
    v = np.asarray(values, dtype=np.float64)[mesh.elements]
    s = 1.0 / (2.0 * area)
    gx = (v[:, 0] * b[:, 0] + v[:, 1] * b[:, 1] + v[:, 2] * b[:, 2]) * s
    gy = (v[:, 0] * c[:, 0] + v[:, 1] * c[:, 1] + v[:, 2] * c[:, 2]) * s
    return np.column_stack([gx, gy])
