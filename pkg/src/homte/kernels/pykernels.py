"""Vectorized numpy implementations of the element-loop kernels.

These are the import-time fallback for the compiled extension.  Both
implementations keep the same per-entry floating point operation order so
that results agree bit for bit; change expressions here and in
``_speedups.pyx`` together.
"""

import numpy as np


def tri_geometry(nodes, tris):
    """Signed areas and P1 gradient coefficients of every triangle.

    Returns ``(area, b, c)`` where the gradient of basis function ``i`` on
    element ``e`` is ``(b[e, i], c[e, i]) / (2 * area[e])``.
    """
    x = nodes[tris, 0]
    y = nodes[tris, 1]
    b = np.empty_like(x)
    c = np.empty_like(x)
    b[:, 0] = y[:, 1] - y[:, 2]
    b[:, 1] = y[:, 2] - y[:, 0]
    b[:, 2] = y[:, 0] - y[:, 1]
    c[:, 0] = x[:, 2] - x[:, 1]
    c[:, 1] = x[:, 0] - x[:, 2]
    c[:, 2] = x[:, 1] - x[:, 0]
    area = 0.5 * (x[:, 0] * b[:, 0] + x[:, 1] * b[:, 1] + x[:, 2] * b[:, 2])
    return area, b, c


def stiffness_data(b, c, area, coeff):
    """Local 3x3 stiffness blocks for a per-element scalar conductivity."""
    scale = coeff / (4.0 * area)
    bb = b[:, :, None] * b[:, None, :]
    cc = c[:, :, None] * c[:, None, :]
    return ((bb + cc) * scale[:, None, None]).reshape(-1, 9)


def stiffness_data_tensor(b, c, area, t11, t12, t22):
    """Local stiffness blocks for a per-element symmetric 2x2 conductivity."""
    scale = 1.0 / (4.0 * area)
    bb = b[:, :, None] * b[:, None, :]
    cc = c[:, :, None] * c[:, None, :]
    bc = b[:, :, None] * c[:, None, :]
    cb = c[:, :, None] * b[:, None, :]
    mixed = t11[:, None, None] * bb + t12[:, None, None] * (bc + cb) + t22[:, None, None] * cc
    return (mixed * scale[:, None, None]).reshape(-1, 9)


def mass_data(area, weight):
    """Local 3x3 consistent mass blocks for a per-element scalar weight."""
    factor = weight * area / 12.0
    data = np.empty((area.shape[0], 3, 3), dtype=np.float64)
    data[:] = factor[:, None, None]
    data[:, 0, 0] = 2.0 * factor
    data[:, 1, 1] = 2.0 * factor
    data[:, 2, 2] = 2.0 * factor
    return data.reshape(-1, 9)


def gradient_accumulate(tris, b, c, area, values, n_nodes):
    """Area-weighted average of element gradients at each node."""
    v = values[tris]
    s = 1.0 / (2.0 * area)
    gx = (v[:, 0] * b[:, 0] + v[:, 1] * b[:, 1] + v[:, 2] * b[:, 2]) * s
    gy = (v[:, 0] * c[:, 0] + v[:, 1] * c[:, 1] + v[:, 2] * c[:, 2]) * s
    flat = tris.ravel()
    acc_x = np.bincount(flat, weights=np.repeat(area * gx, 3), minlength=n_nodes)
    acc_y = np.bincount(flat, weights=np.repeat(area * gy, 3), minlength=n_nodes)
    wsum = np.bincount(flat, weights=np.repeat(area, 3), minlength=n_nodes)
    out = np.empty((n_nodes, 2), dtype=np.float64)
    out[:, 0] = acc_x / wsum
    out[:, 1] = acc_y / wsum
    return out


def locate_uniform(points, n, x0, y0, hx, hy):
    """Element index and barycentric weights on a checkerboard-split grid.

    Points are assumed inside the grid up to roundoff; coordinates are
    clamped to the closed domain before lookup.
    """
    fx = np.clip((points[:, 0] - x0) / hx, 0.0, float(n))
    fy = np.clip((points[:, 1] - y0) / hy, 0.0, float(n))
    ix = np.minimum(fx.astype(np.int64), n - 1)
    iy = np.minimum(fy.astype(np.int64), n - 1)
    xi = fx - ix
    eta = fy - iy

    npts = points.shape[0]
    elem = np.empty(npts, dtype=np.int64)
    lam = np.empty((npts, 3), dtype=np.float64)

    even = ((ix + iy) & 1) == 0
    # even squares split along the (0,0)-(1,1) diagonal
    upper = eta > xi
    sel = even & ~upper
    elem[sel] = 2 * (iy[sel] * n + ix[sel])
    lam[sel, 0] = 1.0 - xi[sel]
    lam[sel, 1] = xi[sel] - eta[sel]
    lam[sel, 2] = eta[sel]
    sel = even & upper
    elem[sel] = 2 * (iy[sel] * n + ix[sel]) + 1
    lam[sel, 0] = 1.0 - eta[sel]
    lam[sel, 1] = xi[sel]
    lam[sel, 2] = eta[sel] - xi[sel]
    # odd squares split along the (1,0)-(0,1) diagonal
    second = xi + eta > 1.0
    sel = ~even & ~second
    elem[sel] = 2 * (iy[sel] * n + ix[sel])
    lam[sel, 0] = (1.0 - xi[sel]) - eta[sel]
    lam[sel, 1] = xi[sel]
    lam[sel, 2] = eta[sel]
    sel = ~even & second
    elem[sel] = 2 * (iy[sel] * n + ix[sel]) + 1
    lam[sel, 0] = 1.0 - eta[sel]
    lam[sel, 1] = (xi[sel] + eta[sel]) - 1.0
    lam[sel, 2] = 1.0 - xi[sel]
    return elem, lam
