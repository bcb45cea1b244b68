# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled element-loop kernels.

Mirror of ``pykernels``; per-entry floating point operation order is kept
identical so either implementation produces bit-equal results.  Do not add
-ffast-math style flags: reassociation would break that contract.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def tri_geometry(const double[:, ::1] nodes, const long long[:, ::1] tris):
    cdef Py_ssize_t ne = tris.shape[0]
    area_arr = np.empty(ne, dtype=np.float64)
    b_arr = np.empty((ne, 3), dtype=np.float64)
    c_arr = np.empty((ne, 3), dtype=np.float64)
    cdef double[::1] area = area_arr
    cdef double[:, ::1] b = b_arr
    cdef double[:, ::1] c = c_arr
    cdef Py_ssize_t e
    cdef long long n0, n1, n2
    cdef double x0, x1, x2, y0, y1, y2
    for e in range(ne):
        n0 = tris[e, 0]
        n1 = tris[e, 1]
        n2 = tris[e, 2]
        x0 = nodes[n0, 0]; y0 = nodes[n0, 1]
        x1 = nodes[n1, 0]; y1 = nodes[n1, 1]
        x2 = nodes[n2, 0]; y2 = nodes[n2, 1]
        b[e, 0] = y1 - y2
        b[e, 1] = y2 - y0
        b[e, 2] = y0 - y1
        c[e, 0] = x2 - x1
        c[e, 1] = x0 - x2
        c[e, 2] = x1 - x0
        area[e] = 0.5 * (x0 * b[e, 0] + x1 * b[e, 1] + x2 * b[e, 2])
    return area_arr, b_arr, c_arr


def stiffness_data(const double[:, ::1] b, const double[:, ::1] c,
                   const double[::1] area, const double[::1] coeff):
    cdef Py_ssize_t ne = area.shape[0]
    data_arr = np.empty((ne, 9), dtype=np.float64)
    cdef double[:, ::1] data = data_arr
    cdef Py_ssize_t e, i, j
    cdef double s
    for e in range(ne):
        s = coeff[e] / (4.0 * area[e])
        for i in range(3):
            for j in range(3):
                data[e, 3 * i + j] = ((b[e, i] * b[e, j]) + (c[e, i] * c[e, j])) * s
    return data_arr


def stiffness_data_tensor(const double[:, ::1] b, const double[:, ::1] c,
                          const double[::1] area, const double[::1] t11,
                          const double[::1] t12, const double[::1] t22):
    cdef Py_ssize_t ne = area.shape[0]
    data_arr = np.empty((ne, 9), dtype=np.float64)
    cdef double[:, ::1] data = data_arr
    cdef Py_ssize_t e, i, j
    cdef double s, mixed
    for e in range(ne):
        s = 1.0 / (4.0 * area[e])
        for i in range(3):
            for j in range(3):
                mixed = t11[e] * (b[e, i] * b[e, j]) \
                    + t12[e] * ((b[e, i] * c[e, j]) + (c[e, i] * b[e, j])) \
                    + t22[e] * (c[e, i] * c[e, j])
                data[e, 3 * i + j] = mixed * s
    return data_arr


def mass_data(const double[::1] area, const double[::1] weight):
    cdef Py_ssize_t ne = area.shape[0]
    data_arr = np.empty((ne, 9), dtype=np.float64)
    cdef double[:, ::1] data = data_arr
    cdef Py_ssize_t e, k
    cdef double f
    for e in range(ne):
        f = weight[e] * area[e] / 12.0
        for k in range(9):
            data[e, k] = f
        data[e, 0] = 2.0 * f
        data[e, 4] = 2.0 * f
        data[e, 8] = 2.0 * f
    return data_arr


def gradient_accumulate(const long long[:, ::1] tris, const double[:, ::1] b,
                        const double[:, ::1] c, const double[::1] area,
                        const double[::1] values, Py_ssize_t n_nodes):
    cdef Py_ssize_t ne = tris.shape[0]
    acc_x_arr = np.zeros(n_nodes, dtype=np.float64)
    acc_y_arr = np.zeros(n_nodes, dtype=np.float64)
    wsum_arr = np.zeros(n_nodes, dtype=np.float64)
    cdef double[::1] acc_x = acc_x_arr
    cdef double[::1] acc_y = acc_y_arr
    cdef double[::1] wsum = wsum_arr
    cdef Py_ssize_t e, i
    cdef long long node
    cdef double s, gx, gy, wx, wy, a
    for e in range(ne):
        a = area[e]
        s = 1.0 / (2.0 * a)
        gx = (values[tris[e, 0]] * b[e, 0] + values[tris[e, 1]] * b[e, 1]
              + values[tris[e, 2]] * b[e, 2]) * s
        gy = (values[tris[e, 0]] * c[e, 0] + values[tris[e, 1]] * c[e, 1]
              + values[tris[e, 2]] * c[e, 2]) * s
        wx = a * gx
        wy = a * gy
        for i in range(3):
            node = tris[e, i]
            acc_x[node] += wx
            acc_y[node] += wy
            wsum[node] += a
    out = np.empty((n_nodes, 2), dtype=np.float64)
    cdef double[:, ::1] out_v = out
    cdef Py_ssize_t p
    for p in range(n_nodes):
        out_v[p, 0] = acc_x[p] / wsum[p]
        out_v[p, 1] = acc_y[p] / wsum[p]
    return out


def locate_uniform(const double[:, ::1] points, Py_ssize_t n, double x0, double y0,
                   double hx, double hy):
    cdef Py_ssize_t npts = points.shape[0]
    elem_arr = np.empty(npts, dtype=np.int64)
    lam_arr = np.empty((npts, 3), dtype=np.float64)
    cdef long long[::1] elem = elem_arr
    cdef double[:, ::1] lam = lam_arr
    cdef Py_ssize_t p
    cdef double fx, fy, xi, eta, nf = <double> n
    cdef long long ix, iy
    for p in range(npts):
        fx = (points[p, 0] - x0) / hx
        fy = (points[p, 1] - y0) / hy
        if fx < 0.0:
            fx = 0.0
        elif fx > nf:
            fx = nf
        if fy < 0.0:
            fy = 0.0
        elif fy > nf:
            fy = nf
        ix = <long long> fx
        iy = <long long> fy
        if ix > n - 1:
            ix = n - 1
        if iy > n - 1:
            iy = n - 1
        xi = fx - ix
        eta = fy - iy
        if ((ix + iy) & 1) == 0:
            if eta > xi:
                elem[p] = 2 * (iy * n + ix) + 1
                lam[p, 0] = 1.0 - eta
                lam[p, 1] = xi
                lam[p, 2] = eta - xi
            else:
                elem[p] = 2 * (iy * n + ix)
                lam[p, 0] = 1.0 - xi
                lam[p, 1] = xi - eta
                lam[p, 2] = eta
        else:
            if xi + eta > 1.0:
                elem[p] = 2 * (iy * n + ix) + 1
                lam[p, 0] = 1.0 - eta
                lam[p, 1] = (xi + eta) - 1.0
                lam[p, 2] = 1.0 - xi
            else:
                elem[p] = 2 * (iy * n + ix)
                lam[p, 0] = (1.0 - xi) - eta
                lam[p, 1] = xi
                lam[p, 2] = eta
    return elem_arr, lam_arr
