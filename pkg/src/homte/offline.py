"""Representative-temperature database of corrector fields and coefficients.

The table is built once per (cell mesh, material law) pair on an
equidistant temperature grid, then serves every later query by piecewise
linear interpolation.  Temperature derivatives of stored data come from
knot differencing: central in the interior, one-sided at the ends.

On disk a table is a directory with a JSON manifest plus one little-endian
float64 binary file per field per knot, so round trips are bit-exact and
the contents stay inspectable.
"""

import json
import os
import shutil
import warnings

import numpy as np

from . import fem
from .cell import (FLAT_FIELD_NAMES, CellFunctionSet, CellOperator,
                   TemperatureDerivatives, solve_first_order, solve_second_order)
from .exceptions import TableError
from .homogenize import HomogenizedCoefficients, compute_homogenized
from .materials import ellipticity_bounds, positivity_check
from .mesh import build_structured_mesh

FORMAT_VERSION = 1
COEFF_SELECTORS = ("S_hat", "k_hat", "sigma_hat", "sigma_hat_star")


def knot_derivatives(values):
    """d/du of knot data along axis 0: central inside, one-sided at ends."""
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    if len(values) < 2:
        raise TableError("need at least two knots to difference")
    out[0] = values[1] - values[0]
    out[-1] = values[-1] - values[-2]
    out[1:-1] = 0.5 * (values[2:] - values[:-2])
    return out  # caller divides by spacing


class OfflineTable:
    """Knot grid of (cell function set, homogenized coefficients)."""

    def __init__(self, temperatures, cells, homogenized, mesh, bc_mode,
                 law_fingerprint, include_gradient_families=True):
        self.temperatures = np.asarray(temperatures, dtype=np.float64)
        if len(self.temperatures) < 2:
            raise TableError("a table needs at least two temperatures")
        spacing = np.diff(self.temperatures)
        if np.any(spacing <= 0.0) or (np.max(spacing) - np.min(spacing)
                                      > 1e-12 * np.max(np.abs(spacing))):
            raise TableError("knot temperatures must be strictly increasing "
                             "and equidistant")
        self.cells = list(cells)
        self.homogenized = list(homogenized)
        self.mesh = mesh
        self.bc_mode = bc_mode
        self.mesh_fingerprint = mesh.fingerprint()
        self.law_fingerprint = law_fingerprint
        self.include_gradient_families = include_gradient_families
        self._coeff_rows = None
        self._field_stacks = {}
        self._coeff_slopes = None

    @property
    def n_points(self):
        return len(self.temperatures)

    @property
    def spacing(self):
        return float(self.temperatures[1] - self.temperatures[0])

    # -- interpolation ----------------------------------------------------

    def _bracket(self, u0):
        temps = self.temperatures
        if u0 < temps[0] or u0 > temps[-1]:
            warnings.warn(f"temperature {u0} outside table range "
                          f"[{temps[0]}, {temps[-1]}]; clamping", stacklevel=3)
        u = min(max(float(u0), temps[0]), temps[-1])
        lo = min(int(np.searchsorted(temps, u, side="right")) - 1,
                 self.n_points - 2)
        lo = max(lo, 0)
        w = (u - temps[lo]) / (temps[lo + 1] - temps[lo])
        return lo, w

    def interpolate(self, u0):
        """Linear blend of the bracketing entries, field and coefficient wise."""
        lo, w = self._bracket(u0)
        a, b = self.cells[lo], self.cells[lo + 1]
        fields = {name: (1.0 - w) * fa + w * fb
                  for (name, fa), fb in zip(a.flat_fields().items(),
                                            b.flat_fields().values())}
        cell = CellFunctionSet.from_flat(float(u0), self.bc_mode,
                                         a.mesh_id, fields)
        vec = ((1.0 - w) * self.homogenized[lo].as_vector()
               + w * self.homogenized[lo + 1].as_vector())
        hom = HomogenizedCoefficients.from_vector(
            float(u0), vec, self.homogenized[lo].mesh_id)
        return cell, hom

    def field_stack(self, name):
        """(n_points, n_nodes) array of one flat field across all knots."""
        if name not in self._field_stacks:
            if name not in FLAT_FIELD_NAMES:
                raise TableError(f"unknown field selector {name!r}")
            self._field_stacks[name] = np.stack(
                [c.flat_fields()[name] for c in self.cells])
        return self._field_stacks[name]

    def coeff_rows(self):
        """(n_points, 13) homogenized vectors [S, k(4), sigma(4), sigma*(4)]."""
        if self._coeff_rows is None:
            self._coeff_rows = np.stack([h.as_vector() for h in self.homogenized])
        return self._coeff_rows

    def blend_weights(self, u_values):
        """Clamped bracketing indices and weights for an array of queries."""
        temps = self.temperatures
        u = np.clip(np.asarray(u_values, dtype=np.float64), temps[0], temps[-1])
        lo = np.clip(np.searchsorted(temps, u, side="right") - 1,
                     0, self.n_points - 2)
        w = (u - temps[lo]) / (temps[lo + 1] - temps[lo])
        return lo, w

    def nodal_coefficients(self, u_values):
        """Homogenized coefficient vectors interpolated at many temperatures."""
        lo, w = self.blend_weights(u_values)
        rows = self.coeff_rows()
        return (1.0 - w)[:, None] * rows[lo] + w[:, None] * rows[lo + 1]

    def d_du(self, u0, selector):
        """u-derivative of a stored field or coefficient at temperature u0."""
        if selector in COEFF_SELECTORS:
            rows = self.coeff_rows()
            idx = {"S_hat": np.s_[0], "k_hat": np.s_[1:5],
                   "sigma_hat": np.s_[5:9], "sigma_hat_star": np.s_[9:13]}[selector]
            data = rows[:, idx]
        else:
            data = self.field_stack(selector)
        deriv = knot_derivatives(data) / self.spacing
        lo, w = self._bracket(u0)
        out = (1.0 - w) * deriv[lo] + w * deriv[lo + 1]
        if selector in ("k_hat", "sigma_hat", "sigma_hat_star"):
            return out.reshape(2, 2)
        return out

    def knot_temperature_derivatives(self):
        """Per-knot derivative data consumed by the gradient corrector solves."""
        dm = knot_derivatives(np.stack([c.M for c in self.cells])) / self.spacing
        dn = knot_derivatives(np.stack([c.N for c in self.cells])) / self.spacing
        dk = knot_derivatives(np.stack([h.k_hat for h in self.homogenized])) / self.spacing
        ds = knot_derivatives(np.stack([h.sigma_hat for h in self.homogenized])) / self.spacing
        return [TemperatureDerivatives(dM=dm[s], dN=dn[s], d_k_hat=dk[s],
                                       d_sigma_hat=ds[s])
                for s in range(self.n_points)]


def build_table(mesh, law, u_range=None, n_points=8, bc_mode="dirichlet",
                include_gradient_families=True, compat_tol=1e-6):
    """Solve every cell problem on an equidistant temperature grid.

    First-order solves and homogenization run for all knots first, because
    the gradient corrector families need knot-differenced derivatives of
    those results before the second-order pass.
    """
    if n_points < 2:
        raise TableError("n_points must be at least 2")
    lo, hi = u_range if u_range is not None else law.u_range
    ellipticity_bounds(law, (lo, hi))
    positivity_check(law, (lo, hi))
    temps = lo + (hi - lo) / (n_points - 1) * np.arange(n_points)

    firsts = []
    homs = []
    operators = []
    for u0 in temps:
        phases = mesh.element_phase
        op_k = CellOperator(mesh, law.property_values("k", phases, u0),
                            bc_mode, compat_tol)
        op_s = CellOperator(mesh, law.property_values("sigma", phases, u0),
                            bc_mode, compat_tol)
        m, n = solve_first_order(mesh, law, u0, bc_mode, operators=(op_k, op_s))
        firsts.append((m, n))
        homs.append(compute_homogenized(mesh, law, u0, m, n))
        operators.append((op_k, op_s))

    spacing = float(temps[1] - temps[0])
    dm = knot_derivatives(np.stack([m for m, _ in firsts])) / spacing
    dn = knot_derivatives(np.stack([n for _, n in firsts])) / spacing
    dk = knot_derivatives(np.stack([h.k_hat for h in homs])) / spacing
    ds = knot_derivatives(np.stack([h.sigma_hat for h in homs])) / spacing

    cells = []
    for s, u0 in enumerate(temps):
        deriv = TemperatureDerivatives(dM=dm[s], dN=dn[s], d_k_hat=dk[s],
                                       d_sigma_hat=ds[s])
        cells.append(solve_second_order(
            mesh, law, float(u0), firsts[s], homs[s], deriv,
            bc_mode=bc_mode, operators=operators[s],
            include_gradient_families=include_gradient_families))

    return OfflineTable(temps, cells, homs, mesh, bc_mode, law.fingerprint(),
                        include_gradient_families)


# -- persistence -----------------------------------------------------------

def _write_array(path, arr):
    np.ascontiguousarray(arr, dtype="<f8").tofile(path)


def _read_array(path, count):
    try:
        arr = np.fromfile(path, dtype="<f8")
    except OSError as exc:
        raise TableError(f"cannot read {path}: {exc}") from exc
    if arr.size != count:
        raise TableError(f"{path} holds {arr.size} values, expected {count}")
    return arr


def save(table, path):
    """Write the table directory atomically (build aside, then swap in)."""
    path = os.fspath(path)
    tmp = f"{path}.tmp-{os.getpid()}"
    if os.path.exists(tmp):
        shutil.rmtree(tmp)
    os.makedirs(tmp)
    g = table.mesh.grid
    manifest = {
        "format": FORMAT_VERSION,
        "temperatures": [float(t) for t in table.temperatures],
        "bc_mode": table.bc_mode,
        "include_gradient_families": table.include_gradient_families,
        "cell_n": g.n,
        "domain": [g.x0, g.x0 + g.n * g.hx, g.y0, g.y0 + g.n * g.hy],
        "n_nodes": table.mesh.n_nodes,
        "n_elements": table.mesh.n_elements,
        "mesh_fingerprint": table.mesh_fingerprint,
        "law_fingerprint": table.law_fingerprint,
        "fields": list(FLAT_FIELD_NAMES),
    }
    _write_array(os.path.join(tmp, "element_phase.bin"),
                 table.mesh.element_phase.astype("<f8"))
    for s in range(table.n_points):
        fields = table.cells[s].flat_fields()
        for name in FLAT_FIELD_NAMES:
            _write_array(os.path.join(tmp, f"{name}_{s:03d}.bin"), fields[name])
        _write_array(os.path.join(tmp, f"homog_{s:03d}.bin"),
                     table.homogenized[s].as_vector())
    with open(os.path.join(tmp, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    if os.path.exists(path):
        shutil.rmtree(path)
    os.replace(tmp, path)


def load(path, mesh=None, law=None):
    """Read a table directory; verify fingerprints when inputs are supplied."""
    path = os.fspath(path)
    manifest_path = os.path.join(path, "manifest.json")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise TableError(f"no table at {path}") from exc
    except json.JSONDecodeError as exc:
        raise TableError(f"malformed manifest in {path}") from exc
    if manifest.get("format") != FORMAT_VERSION:
        raise TableError(f"unsupported table format {manifest.get('format')!r}")

    n_nodes = int(manifest["n_nodes"])
    n_elements = int(manifest["n_elements"])
    cell_mesh = build_structured_mesh(tuple(manifest["domain"]),
                                      int(manifest["cell_n"]))
    phases = _read_array(os.path.join(path, "element_phase.bin"),
                         n_elements).astype(np.int64)
    cell_mesh = cell_mesh.with_phases(phases)
    if cell_mesh.fingerprint() != manifest["mesh_fingerprint"]:
        raise TableError("stored mesh does not reproduce its fingerprint")
    if mesh is not None and mesh.fingerprint() != manifest["mesh_fingerprint"]:
        raise TableError("stale table: cell mesh fingerprint mismatch")
    if law is not None and law.fingerprint() != manifest["law_fingerprint"]:
        raise TableError("stale table: material law fingerprint mismatch")

    temps = np.asarray(manifest["temperatures"], dtype=np.float64)
    mesh_id = cell_mesh.fingerprint()[:16]
    cells = []
    homs = []
    for s, u0 in enumerate(temps):
        fields = {name: _read_array(os.path.join(path, f"{name}_{s:03d}.bin"),
                                    n_nodes)
                  for name in manifest["fields"]}
        cells.append(CellFunctionSet.from_flat(
            float(u0), manifest["bc_mode"], mesh_id, fields))
        homs.append(HomogenizedCoefficients.from_vector(
            float(u0), _read_array(os.path.join(path, f"homog_{s:03d}.bin"), 13),
            mesh_id))
    return OfflineTable(temps, cells, homs, cell_mesh, manifest["bc_mode"],
                        manifest["law_fingerprint"],
                        bool(manifest["include_gradient_families"]))


def mean_field_magnitudes(table):
    """Max |cell average| across fields and knots, a build diagnostic."""
    worst = 0.0
    for cfs in table.cells:
        for values in cfs.flat_fields().values():
            worst = max(worst, abs(fem.p1_mean(table.mesh, values)))
    return worst
