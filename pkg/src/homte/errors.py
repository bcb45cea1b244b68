"""Norms, mesh transfer and the per-time-level error report."""

from dataclasses import dataclass

import numpy as np

from . import fem
from .exceptions import UndefinedRelativeError

REPORT_COLUMNS = ("Terr0", "Terr1", "Terr2", "TErr0", "TErr1", "TErr2",
                  "Perr0", "Perr1", "Perr2", "PErr0", "PErr1", "PErr2")


def transfer_to_fine(values, coarse_mesh, fine_mesh):
    """P1 interpolation of a coarse nodal field at the fine mesh nodes."""
    return coarse_mesh.interpolate(values, fine_mesh.nodes)


def _unit_mass(mesh):
    cached = getattr(mesh, "_unit_mass", None)
    if cached is None:
        cached = fem.assemble_mass(mesh, 1.0)
        mesh._unit_mass = cached
    return cached


def l2_norm(mesh, values):
    """Exact L2 norm of a P1 field (consistent-mass quadratic form)."""
    v = np.asarray(values, dtype=np.float64)
    return float(np.sqrt(max(v @ (_unit_mass(mesh) @ v), 0.0)))


def h1_semi_norm(mesh, values):
    g = fem.element_gradients(mesh, values)
    return float(np.sqrt(np.sum(mesh.areas * np.sum(g * g, axis=1))))


def relative_error(numeric, reference, mesh, norm="l2"):
    """||numeric - reference|| / ||reference|| in the selected norm."""
    if norm == "l2":
        measure = l2_norm
    elif norm == "h1_semi":
        measure = h1_semi_norm
    else:
        raise ValueError(f"unknown norm {norm!r}")
    ref = measure(mesh, reference)
    if ref == 0.0:
        raise UndefinedRelativeError("reference field has zero norm")
    return measure(mesh, np.asarray(numeric) - np.asarray(reference)) / ref


@dataclass
class ErrorReport:
    """Relative errors of all three orders against the reference, per level.

    ``data`` columns follow :data:`REPORT_COLUMNS`: temperature then
    potential, L2 then H1-seminorm, order 0/1/2 within each block.
    """

    steps: np.ndarray
    times: np.ndarray
    data: np.ndarray

    def column(self, name):
        return self.data[:, REPORT_COLUMNS.index(name)]

    def final(self, name):
        return float(self.column(name)[-1])

    def rows(self):
        for i, step in enumerate(self.steps):
            yield (int(step), float(self.times[i]), *map(float, self.data[i]))


def _report_entry(numeric, reference, mesh, norm):
    # a constant state has zero H1-seminorm; fall back to the absolute
    # difference there so level 0 stays well defined (and 0 iff coincident)
    measure = l2_norm if norm == "l2" else h1_semi_norm
    ref = measure(mesh, reference)
    diff = measure(mesh, np.asarray(numeric) - np.asarray(reference))
    return diff / ref if ref > 0.0 else diff


def build_report(recon, traj, dns_mesh, dns_traj):
    """Errors of homogenized/first/second-order fields against the reference.

    All fields are compared on the reference mesh; the potential at level m
    is the half-level solve stored at that slot, identically produced by
    both trajectories.
    """
    n_levels = len(dns_traj.u)
    grid = dns_traj.grid
    data = np.empty((n_levels, len(REPORT_COLUMNS)))
    for m in range(n_levels):
        fields = {order: recon.fields(traj, m, order)
                  for order in ("homogenized", "loms", "homs")}
        for j, order in enumerate(("homogenized", "loms", "homs")):
            u_rec, p_rec = fields[order]
            data[m, j] = _report_entry(u_rec, dns_traj.u[m], dns_mesh, "l2")
            data[m, 3 + j] = _report_entry(u_rec, dns_traj.u[m], dns_mesh,
                                           "h1_semi")
            data[m, 6 + j] = _report_entry(p_rec, dns_traj.phi[m], dns_mesh,
                                           "l2")
            data[m, 9 + j] = _report_entry(p_rec, dns_traj.phi[m], dns_mesh,
                                           "h1_semi")
    times = np.array([grid.time(m) for m in range(n_levels)])
    return ErrorReport(steps=np.arange(n_levels), times=times, data=data)
