"""Multiscale field reconstruction on an evaluation mesh.

Builds the corrected temperature/potential fields at any stored time level
from three ingredients: the coarse trajectory (plus recovered spatial
derivatives and a difference-in-time rate), the corrector fields
interpolated at the cell-local coordinates of each evaluation node, and
the period length.  Three orders are available: the plain homogenized
field, the first-order corrected field, and the second-order corrected
field that also carries the thermo-electric cross terms.
"""

import numpy as np

from .exceptions import ProvenanceError
from .fem import recover_gradient

ORDERS = ("homogenized", "loms", "homs")

DIM = 2


def micro_coords(x, epsilon):
    """Cell-local coordinates y = frac(x / epsilon), component-wise."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    return np.mod(np.asarray(x, dtype=np.float64) / epsilon, 1.0)


class Reconstructor:
    """Precomputed transfer operators for one (coarse mesh, table, target).

    Building one instance is the expensive part (point location on both the
    coarse and the cell mesh, plus spatial interpolation of every corrector
    field at every knot temperature); evaluating a time level afterwards is
    a handful of gathers.
    """

    def __init__(self, coarse_mesh, table, eval_mesh, epsilon,
                 include_gradient_families=True):
        self.coarse = coarse_mesh
        self.table = table
        self.eval_mesh = eval_mesh
        self.epsilon = float(epsilon)
        self.include_gradient_families = include_gradient_families
        points = eval_mesh.nodes
        elem, lam = coarse_mesh.locate(points)
        self._coarse_tri = coarse_mesh.elements[elem]
        self._coarse_lam = lam
        y = micro_coords(points, self.epsilon)
        celem, clam = table.mesh.locate(y)
        self._cell_tri = table.mesh.elements[celem]
        self._cell_lam = clam
        self._knot_values = {}

    # -- transfers ---------------------------------------------------------

    def from_coarse(self, nodal):
        """Coarse nodal field interpolated at the evaluation nodes."""
        return (np.asarray(nodal)[self._coarse_tri] * self._coarse_lam).sum(axis=1)

    def _knot_field(self, name):
        """(n_knots, n_eval) corrector values at each node's cell coordinates."""
        if name not in self._knot_values:
            stack = self.table.field_stack(name)
            vals = stack[:, self._cell_tri]      # (T, n_eval, 3)
            self._knot_values[name] = np.einsum("tpk,pk->tp", vals,
                                                self._cell_lam)
        return self._knot_values[name]

    def cell_values(self, name, u_at_nodes):
        """Corrector field at (y_node, u_node): spatial then thermal blend."""
        lo, w = self.table.blend_weights(u_at_nodes)
        knot = self._knot_field(name)
        idx = np.arange(knot.shape[1])
        return (1.0 - w) * knot[lo, idx] + w * knot[lo + 1, idx]

    # -- evaluation ---------------------------------------------------------

    def _time_rate(self, traj, n):
        dt = traj.grid.dt
        if n == 0:
            return (traj.u[1] - traj.u[0]) / dt
        return (traj.u[n] - traj.u[n - 1]) / dt

    def fields(self, traj, n, order):
        """(u, phi) of the requested order at time index n on the eval mesh."""
        if order not in ORDERS:
            raise ValueError(f"unknown reconstruction order {order!r}")
        if not 0 <= n < len(traj.u):
            raise ProvenanceError(f"time index {n} outside trajectory")

        u0 = self.from_coarse(traj.u[n])
        phi0 = self.from_coarse(traj.phi[n])
        if order == "homogenized":
            return u0, phi0

        grad_u_c = recover_gradient(self.coarse, traj.u[n])
        grad_p_c = recover_gradient(self.coarse, traj.phi[n])
        gu = np.column_stack([self.from_coarse(grad_u_c[:, a]) for a in range(DIM)])
        gp = np.column_stack([self.from_coarse(grad_p_c[:, a]) for a in range(DIM)])

        eps = self.epsilon
        u_out = u0.copy()
        phi_out = phi0.copy()
        for a in range(DIM):
            u_out += eps * self.cell_values(f"M_{a}", u0) * gu[:, a]
            phi_out += eps * self.cell_values(f"N_{a}", u0) * gp[:, a]
        if order == "loms":
            return u_out, phi_out

        # second derivatives: recovered gradient applied twice
        hess_u = [recover_gradient(self.coarse, grad_u_c[:, a]) for a in range(DIM)]
        hess_p = [recover_gradient(self.coarse, grad_p_c[:, a]) for a in range(DIM)]
        dudt = self.from_coarse(self._time_rate(traj, n))

        eps2 = eps * eps
        u2 = self.cell_values("Q", u0) * dudt
        phi2 = np.zeros_like(phi0)
        for a1 in range(DIM):
            for a2 in range(DIM):
                d2u = self.from_coarse(hess_u[a1][:, a2])
                d2p = self.from_coarse(hess_p[a1][:, a2])
                u2 += self.cell_values(f"M2_{a1}{a2}", u0) * d2u
                u2 += self.cell_values(f"H_{a1}{a2}", u0) * gu[:, a1] * gu[:, a2]
                u2 += self.cell_values(f"G_{a1}{a2}", u0) * gp[:, a1] * gp[:, a2]
                phi2 += self.cell_values(f"N2_{a1}{a2}", u0) * d2p
                phi2 += self.cell_values(f"W_{a1}{a2}", u0) * gu[:, a1] * gp[:, a2]
                if self.include_gradient_families:
                    u2 += (self.cell_values(f"R2_{a1}{a2}", u0)
                           * gu[:, a1] * gu[:, a2])
                    phi2 += (self.cell_values(f"Z2_{a1}{a2}", u0)
                             * gp[:, a1] * gu[:, a2])
        return u_out + eps2 * u2, phi_out + eps2 * phi2
