#!/usr/bin/env python3
"""Benchmark the compiled element kernels against the numpy fallback.

Runs each kernel on a large mesh with both implementations, checks that the
outputs agree bit for bit, and prints a timing table.  Usage:

    python benchmarks/bench_kernels.py [n]

where n is the subdivisions per side (default 512, ~524k triangles).
"""

import sys
import time

import numpy as np

from homte.kernels import pykernels
from homte.mesh import build_structured_mesh

try:
    from homte.kernels import _speedups
except ImportError:
    sys.exit("compiled kernels not built; run pip install -e . first")


def timeit(fn, *args, repeats=5):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def equal(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 512
    mesh = build_structured_mesh((0.0, 1.0, 0.0, 1.0), n)
    rng = np.random.default_rng(7)
    area, b, c = pykernels.tri_geometry(mesh.nodes, mesh.elements)
    coeff = rng.uniform(0.5, 4.0, mesh.n_elements)
    t11 = rng.uniform(1.0, 2.0, mesh.n_elements)
    t12 = rng.uniform(-0.2, 0.2, mesh.n_elements)
    t22 = rng.uniform(1.0, 2.0, mesh.n_elements)
    values = rng.standard_normal(mesh.n_nodes)
    points = rng.uniform(0.0, 1.0, (mesh.n_nodes, 2))

    cases = [
        ("tri_geometry", (mesh.nodes, mesh.elements)),
        ("stiffness_data", (b, c, area, coeff)),
        ("stiffness_data_tensor", (b, c, area, t11, t12, t22)),
        ("mass_data", (area, coeff)),
        ("gradient_accumulate", (mesh.elements, b, c, area, values,
                                 mesh.n_nodes)),
        ("locate_uniform", (points, n, 0.0, 0.0, 1.0 / n, 1.0 / n)),
    ]

    print(f"mesh: {mesh.n_elements} triangles, {mesh.n_nodes} nodes")
    print(f"{'kernel':24s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}  bitwise")
    for name, args in cases:
        t_py, out_py = timeit(getattr(pykernels, name), *args)
        t_cy, out_cy = timeit(getattr(_speedups, name), *args)
        same = equal(out_py, out_cy)
        print(f"{name:24s} {t_py * 1e3:9.2f}ms {t_cy * 1e3:9.2f}ms "
              f"{t_py / t_cy:7.2f}x  {'yes' if same else 'NO'}")
        if not same:
            sys.exit(f"kernel {name}: implementations disagree")


if __name__ == "__main__":
    main()
