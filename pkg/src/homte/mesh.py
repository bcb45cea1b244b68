"""Structured triangular meshes with phase labels for two-phase composites.

All meshes in this package are uniform rectangle grids where every grid
square is split into two triangles.  The diagonal direction alternates in a
checkerboard pattern, which keeps the triangulation mirror-symmetric about
both midplanes for even subdivision counts.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .exceptions import DiscretizationError, GeometryError, UnknownMarkerError
from .kernels import locate_uniform, tri_geometry

SIDE_TAGS = ("bottom", "right", "top", "left")

MATRIX = 0
INCLUSION = 1


@dataclass(frozen=True)
class GridInfo:
    """Layout of a structured mesh, used for O(1) point location."""

    n: int
    x0: float
    y0: float
    hx: float
    hy: float


class Mesh:
    """Immutable triangle mesh: nodes, elements, boundary tags, phases.

    ``elements`` are node-index triples with positive (counterclockwise)
    area.  ``boundary_markers`` maps each geometric boundary node to the
    tuple of side tags it belongs to (corners carry two).  ``element_phase``
    holds one phase id per element.
    """

    def __init__(self, nodes, elements, boundary_markers, element_phase=None,
                 boundary_edges=(), grid=None):
        self.nodes = np.ascontiguousarray(nodes, dtype=np.float64)
        self.elements = np.ascontiguousarray(elements, dtype=np.int64)
        self.boundary_markers = dict(boundary_markers)
        if element_phase is None:
            element_phase = np.zeros(len(self.elements), dtype=np.int64)
        self.element_phase = np.ascontiguousarray(element_phase, dtype=np.int64)
        if len(self.element_phase) != len(self.elements):
            raise DiscretizationError("one phase label per element required")
        self.boundary_edges = tuple(boundary_edges)
        self.grid = grid
        for arr in (self.nodes, self.elements, self.element_phase):
            arr.flags.writeable = False
        self._geometry = None
        self._centroids = None
        self._fingerprint = None

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    def geometry(self):
        """(area, b, c) per element; gradient of basis i is (b_i, c_i)/(2A)."""
        if self._geometry is None:
            area, b, c = tri_geometry(self.nodes, self.elements)
            if np.any(area <= 0.0):
                raise DiscretizationError("element with non-positive area")
            self._geometry = (area, b, c)
        return self._geometry

    @property
    def areas(self):
        return self.geometry()[0]

    @property
    def centroids(self):
        if self._centroids is None:
            self._centroids = self.nodes[self.elements].mean(axis=1)
        return self._centroids

    def with_phases(self, element_phase):
        return Mesh(self.nodes, self.elements, self.boundary_markers,
                    element_phase, self.boundary_edges, self.grid)

    def fingerprint(self):
        """Content hash over node coordinates, connectivity and phases."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            h.update(self.nodes.tobytes())
            h.update(self.elements.tobytes())
            h.update(self.element_phase.tobytes())
            h.update(repr(sorted(self.boundary_markers.items())).encode())
            self._fingerprint = h.hexdigest()
        return self._fingerprint

    def locate(self, points):
        """Element index and barycentric weights for points in this mesh."""
        if self.grid is None:
            raise GeometryError("point location requires a structured mesh")
        g = self.grid
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        span_x = g.n * g.hx
        span_y = g.n * g.hy
        tol = 1e-12 * max(span_x, span_y)
        out_x = (points[:, 0] < g.x0 - tol) | (points[:, 0] > g.x0 + span_x + tol)
        out_y = (points[:, 1] < g.y0 - tol) | (points[:, 1] > g.y0 + span_y + tol)
        if np.any(out_x | out_y):
            raise GeometryError("query point outside the mesh")
        return locate_uniform(np.ascontiguousarray(points), g.n, g.x0, g.y0, g.hx, g.hy)

    def interpolate(self, values, points):
        """P1 interpolation of a nodal field at arbitrary points."""
        elem, lam = self.locate(points)
        tri = self.elements[elem]
        v = np.asarray(values, dtype=np.float64)
        return (v[tri] * lam).sum(axis=1)


@dataclass(frozen=True)
class InclusionSpec:
    """Inclusion layout inside the unit cell.

    All shapes are symmetric about both midplanes of the cell.
    """

    shape: str
    volume_fraction: float

    def __post_init__(self):
        if self.shape not in ("centered_square", "centered_disk", "laminate_x1"):
            raise ValueError(f"unknown inclusion shape {self.shape!r}")
        if not 0.0 < self.volume_fraction < 1.0:
            raise ValueError("volume fraction must lie in (0, 1)")

    def point_phase(self, y):
        """Phase id at cell-local coordinates y in [0,1)^2 (vectorized)."""
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        f = self.volume_fraction
        d1 = np.abs(y[:, 0] - 0.5)
        d2 = np.abs(y[:, 1] - 0.5)
        if self.shape == "centered_square":
            half = 0.5 * np.sqrt(f)
            inside = (d1 <= half) & (d2 <= half)
        elif self.shape == "centered_disk":
            r2 = f / np.pi
            inside = d1 * d1 + d2 * d2 <= r2
        else:  # laminate_x1: band of width f centered at y1 = 1/2
            inside = d1 <= 0.5 * f
        return np.where(inside, INCLUSION, MATRIX).astype(np.int64)


def build_structured_mesh(domain, n):
    """Uniform mesh of an axis-aligned rectangle with n subdivisions per side.

    ``domain`` is (x0, x1, y0, y1).  Produces (n+1)^2 nodes and 2*n^2
    triangles; boundary nodes are tagged by side, corners by both sides.
    """
    if n < 1:
        raise DiscretizationError("need at least one subdivision per side")
    x0, x1, y0, y1 = map(float, domain)
    hx = (x1 - x0) / n
    hy = (y1 - y0) / n
    xs = x0 + hx * np.arange(n + 1)
    ys = y0 + hy * np.arange(n + 1)
    xx, yy = np.meshgrid(xs, ys)  # row-major: node = iy*(n+1) + ix
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    ix, iy = np.meshgrid(np.arange(n), np.arange(n))
    ix = ix.ravel()
    iy = iy.ravel()
    a = iy * (n + 1) + ix
    b = a + 1
    c = b + (n + 1)
    d = a + (n + 1)
    even = ((ix + iy) % 2) == 0
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    # even squares: diagonal a-c; odd squares: diagonal b-d
    tris[0::2] = np.where(even[:, None], np.column_stack([a, b, c]),
                          np.column_stack([a, b, d]))
    tris[1::2] = np.where(even[:, None], np.column_stack([a, c, d]),
                          np.column_stack([b, c, d]))

    markers = {}
    side_nodes = {
        "bottom": np.arange(n + 1),
        "right": n + (n + 1) * np.arange(n + 1),
        "top": n * (n + 1) + np.arange(n + 1),
        "left": (n + 1) * np.arange(n + 1),
    }
    for tag in SIDE_TAGS:
        for node in side_nodes[tag]:
            markers.setdefault(int(node), [])
            markers[int(node)].append(tag)
    markers = {node: tuple(tags) for node, tags in markers.items()}

    edges = []
    for tag in SIDE_TAGS:
        chain = side_nodes[tag]
        edges.extend((int(p), int(q), tag) for p, q in zip(chain[:-1], chain[1:]))

    grid = GridInfo(n=n, x0=x0, y0=y0, hx=hx, hy=hy)
    return Mesh(nodes, tris, markers, boundary_edges=edges, grid=grid)


def unit_cell_mesh(n):
    return build_structured_mesh((0.0, 1.0, 0.0, 1.0), n)


def assign_phases(mesh, inclusion, period=None):
    """Label every element with the phase of its centroid.

    ``period`` maps physical to cell-local coordinates via y = (x/period)
    mod 1; omit it (or pass None) for a mesh of the unit cell itself.  When
    given, the period must tile the mesh domain an integer number of times.
    """
    pts = mesh.centroids
    if period is None:
        y = pts
    else:
        if mesh.grid is not None:
            g = mesh.grid
            for span in (g.n * g.hx, g.n * g.hy):
                ratio = span / period
                if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
                    raise DiscretizationError(
                        f"period {period} does not tile a span of {span}")
        y = np.mod(pts / period, 1.0)
    phases = inclusion.point_phase(y)
    return mesh.with_phases(phases)


def boundary_nodes(mesh, tag="all"):
    """Sorted node indices on the tagged side ('all' for every side)."""
    if tag == "all":
        return sorted(mesh.boundary_markers)
    if tag not in SIDE_TAGS:
        raise UnknownMarkerError(f"unknown boundary tag {tag!r}")
    return sorted(node for node, tags in mesh.boundary_markers.items()
                  if tag in tags)
