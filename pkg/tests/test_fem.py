import numpy as np
import pytest

import homte.fem as fem
from homte.exceptions import (EllipticityError, IncompatibleRhsError,
                              SolverError, UnknownMarkerError)
from homte.mesh import Mesh, boundary_nodes, build_structured_mesh

UNIT = (0.0, 1.0, 0.0, 1.0)


def reference_triangle():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    elements = np.array([[0, 1, 2]])
    markers = {0: ("bottom", "left"), 1: ("bottom",), 2: ("left",)}
    return Mesh(nodes, elements, markers)


def test_local_stiffness_reference_triangle():
    a = fem.assemble_stiffness(reference_triangle(), 1.0).toarray()
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    assert np.allclose(a, expected, atol=1e-15)


def test_stiffness_constants_in_kernel():
    mesh = build_structured_mesh(UNIT, 5)
    a = fem.assemble_stiffness(mesh, 1.0)
    assert np.abs(np.asarray(a.sum(axis=1))).max() < 1e-13


def test_stiffness_linear_in_coefficient():
    mesh = build_structured_mesh(UNIT, 4)
    a1 = fem.assemble_stiffness(mesh, 1.0)
    a10 = fem.assemble_stiffness(mesh, 10.0)
    assert np.allclose(10.0 * a1.toarray(), a10.toarray(), rtol=1e-14)


def test_tensor_stiffness_matches_scalar_for_isotropic(rng):
    mesh = build_structured_mesh(UNIT, 6)
    k = rng.uniform(0.5, 2.0, mesh.n_elements)
    iso = fem.assemble_stiffness(mesh, k)
    tensor = fem.assemble_stiffness(
        mesh, np.column_stack([k, np.zeros_like(k), k]))
    assert np.allclose(iso.toarray(), tensor.toarray(), rtol=1e-14)


def test_nonelliptic_assembly_rejected():
    mesh = build_structured_mesh(UNIT, 2)
    with pytest.raises(EllipticityError):
        fem.assemble_stiffness(mesh, -1.0)
    with pytest.raises(EllipticityError):
        fem.assemble_mass(mesh, 0.0)


def test_local_mass_reference_triangle():
    mesh = reference_triangle()
    m = fem.assemble_mass(mesh, 1.0).toarray()
    area = 0.5
    expected = area / 12.0 * np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0],
                                       [1.0, 1.0, 2.0]])
    assert np.allclose(m, expected, atol=1e-15)


def test_mass_partition_of_unity_and_scaling():
    mesh = build_structured_mesh((0.0, 2.0, 0.0, 1.5), 3)
    m1 = fem.assemble_mass(mesh, 1.0)
    assert m1.sum() == pytest.approx(3.0, rel=1e-12)
    m2 = fem.assemble_mass(mesh, 2.0)
    assert np.allclose(2.0 * m1.toarray(), m2.toarray(), rtol=1e-14)


def test_load_constant_source_sums_to_area():
    mesh = build_structured_mesh(UNIT, 6)
    assert fem.assemble_load(mesh, 1.0).sum() == pytest.approx(1.0, rel=1e-12)
    assert fem.assemble_load(mesh, 20000.0).sum() == pytest.approx(
        20000.0, rel=1e-12)


def test_load_boundary_flux_sums_to_side_measure():
    mesh = build_structured_mesh(UNIT, 5)
    load = fem.assemble_load(mesh, None,
                             neumann={"left": lambda pts: np.ones(len(pts))})
    assert load.sum() == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(UnknownMarkerError):
        fem.assemble_load(mesh, None,
                          neumann={"nowhere": lambda pts: np.ones(len(pts))})


def _poisson_center_value(n, **solve_kw):
    mesh = build_structured_mesh(UNIT, n)
    a = fem.assemble_stiffness(mesh, 1.0)
    b = fem.assemble_load(mesh, 1.0)
    nodes = np.asarray(boundary_nodes(mesh))
    system = fem.SparseSystem(a, b, dirichlet=(nodes, np.zeros(len(nodes))))
    u = fem.solve_system(system, **solve_kw).values
    center = np.where(np.all(np.abs(mesh.nodes - 0.5) < 1e-12, axis=1))[0]
    return float(u[center[0]]), u, mesh


def fourier_center_value(terms=400):
    # series solution of -lap(u) = 1 at the unit-square center
    total = 0.0
    for m in range(1, terms, 2):
        for k in range(1, terms, 2):
            smk = np.sin(m * np.pi / 2) * np.sin(k * np.pi / 2)
            total += 16.0 * smk / (np.pi**4 * m * k * (m * m + k * k))
    return total


def test_poisson_center_against_series_oracle():
    oracle = fourier_center_value()
    assert oracle == pytest.approx(0.07367, abs=1e-5)
    value, _, _ = _poisson_center_value(64)
    assert abs(value - oracle) < 5e-4


def test_poisson_pcg_matches_direct():
    direct, _, _ = _poisson_center_value(32, method="direct")
    pcg, _, _ = _poisson_center_value(32, method="pcg", tol=1e-12)
    assert abs(direct - pcg) < 1e-9


def test_zero_rhs_zero_solution():
    mesh = build_structured_mesh(UNIT, 8)
    a = fem.assemble_stiffness(mesh, 1.0)
    nodes = np.asarray(boundary_nodes(mesh))
    system = fem.SparseSystem(a, np.zeros(mesh.n_nodes),
                              dirichlet=(nodes, np.zeros(len(nodes))))
    assert np.all(fem.solve_system(system).values == 0.0)


def test_constant_dirichlet_maximum_principle():
    mesh = build_structured_mesh(UNIT, 8)
    a = fem.assemble_stiffness(mesh, 3.0)
    nodes = np.asarray(boundary_nodes(mesh))
    system = fem.SparseSystem(a, np.zeros(mesh.n_nodes),
                              dirichlet=(nodes, np.full(len(nodes), 300.0)))
    u = fem.solve_system(system).values
    assert np.allclose(u, 300.0, atol=1e-9)


def test_dirichlet_elimination_keeps_symmetry(rng):
    mesh = build_structured_mesh(UNIT, 6)
    a = fem.assemble_stiffness(mesh, 2.0) + fem.assemble_mass(mesh, 1.0)
    nodes = np.asarray(boundary_nodes(mesh))
    values = rng.standard_normal(len(nodes))
    a_c, _ = fem.apply_dirichlet(a.tocsr(), np.zeros(mesh.n_nodes), nodes, values)
    asym = np.abs((a_c - a_c.T).toarray()).max()
    assert asym < 1e-14
    for node in nodes:
        row = a_c.getrow(node).toarray().ravel()
        expected = np.zeros(mesh.n_nodes)
        expected[node] = 1.0
        assert np.allclose(row, expected)


def test_galerkin_orthogonality(rng):
    mesh = build_structured_mesh(UNIT, 10)
    a = fem.assemble_stiffness(mesh, 1.0)
    b = fem.assemble_load(mesh, lambda p: np.sin(3 * p[:, 0]) + p[:, 1])
    nodes = np.asarray(boundary_nodes(mesh))
    a_c, b_c = fem.apply_dirichlet(a, b, nodes, np.zeros(len(nodes)))
    u = fem.solve_system(fem.SparseSystem(a, b,
                                          dirichlet=(nodes, np.zeros(len(nodes)))),
                         tol=1e-12).values
    for _ in range(5):
        v = rng.standard_normal(mesh.n_nodes)
        v[nodes] = 0.0
        v /= np.linalg.norm(v)
        assert abs(v @ b_c - v @ (a_c @ u)) <= 1e-10 * np.linalg.norm(b_c)


def test_solver_nonconvergence_reports_residual():
    mesh = build_structured_mesh(UNIT, 16)
    a = fem.assemble_stiffness(mesh, 1.0)
    b = fem.assemble_load(mesh, 1.0)
    nodes = np.asarray(boundary_nodes(mesh))
    system = fem.SparseSystem(a, b, dirichlet=(nodes, np.zeros(len(nodes))))
    with pytest.raises(SolverError) as err:
        fem.solve_system(system, method="pcg", maxiter=2)
    assert err.value.residual is not None


def test_singular_system_rejected():
    mesh = build_structured_mesh(UNIT, 2)
    a = fem.assemble_stiffness(mesh, 1.0)  # singular without constraints
    system = fem.SparseSystem(a.tocsr(), np.ones(mesh.n_nodes))
    with pytest.raises(SolverError):
        fem.solve_system(system, method="direct")


def test_periodic_traces_and_zero_mean():
    mesh = build_structured_mesh(UNIT, 8)
    coeff = np.where(mesh.centroids[:, 0] < 0.5, 3.0, 1.0)
    a = fem.assemble_stiffness(mesh, coeff)
    g = np.zeros((mesh.n_elements, 2))
    g[:, 0] = -coeff
    b = fem.assemble_weak_div(mesh, g)
    pm = fem.PeriodicMap(mesh)
    u = fem.solve_system(fem.SparseSystem(a, b, periodic=pm)).values
    n = 8
    left = np.arange(n + 1) * (n + 1)
    right = left + n
    bottom = np.arange(n + 1)
    top = bottom + n * (n + 1)
    assert np.array_equal(u[left], u[right])     # identified DOFs: exact
    assert np.array_equal(u[bottom], u[top])
    assert abs(fem.p1_mean(mesh, u)) < 1e-13


def test_periodic_incompatible_rhs_rejected():
    mesh = build_structured_mesh(UNIT, 4)
    a = fem.assemble_stiffness(mesh, 1.0)
    b = fem.assemble_load(mesh, 1.0)  # mean one: incompatible
    with pytest.raises(IncompatibleRhsError):
        fem.solve_system(fem.SparseSystem(a, b, periodic=fem.PeriodicMap(mesh)))


def test_recover_gradient_exact_for_linears():
    mesh = build_structured_mesh(UNIT, 7)
    g = fem.recover_gradient(mesh, mesh.nodes[:, 0])
    assert np.allclose(g[:, 0], 1.0, atol=1e-13)
    assert np.allclose(g[:, 1], 0.0, atol=1e-13)
    g0 = fem.recover_gradient(mesh, np.full(mesh.n_nodes, 4.2))
    assert np.allclose(g0, 0.0, atol=1e-13)


def test_recover_gradient_convergence_on_quadratic():
    errs = []
    for n in (8, 16, 32):
        mesh = build_structured_mesh(UNIT, n)
        g = fem.recover_gradient(mesh, mesh.nodes[:, 0] ** 2)
        err = g[:, 0] - 2.0 * mesh.nodes[:, 0]
        mass = fem.assemble_mass(mesh, 1.0)
        errs.append(np.sqrt(err @ (mass @ err)))
    rate = np.log2(errs[0] / errs[2]) / 2.0
    assert rate >= 1.0
