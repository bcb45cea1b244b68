import numpy as np
import pytest

import homte.fem as fem
from homte.dns import DnsConfig, build_dns_mesh, solve_dns
from homte.exceptions import DiscretizationError
from homte.macro import (PhaseLawCoefficients, ProblemData, TableCoefficients,
                         TimeGrid, constant, extrapolate_mid, run_trajectory)
from homte.mesh import InclusionSpec, assign_phases, unit_cell_mesh
from homte.offline import build_table

UNIT = (0.0, 1.0, 0.0, 1.0)
SQUARE = InclusionSpec("centered_square", 0.25)


def example_data(f_u=20000.0, f_phi=200.0):
    return ProblemData(f_u=constant(f_u), f_phi=constant(f_phi),
                       u_bc=constant(300.0), phi_bc=constant(0.0),
                       u_init=lambda pts: np.full(len(pts), 300.0))


def config(eps=0.25, epc=8, steps=10, T=0.01, law=None, **kw):
    return DnsConfig(epsilon=eps, elements_per_cell=epc,
                     grid=TimeGrid(T=T, steps=steps), law=law,
                     inclusion=SQUARE, data=example_data(), **kw)


def test_mesh_requires_integral_tiling(composite_law):
    with pytest.raises(DiscretizationError):
        build_dns_mesh(UNIT, 0.3, 8, SQUARE)
    mesh = build_dns_mesh(UNIT, 0.25, 8, SQUARE)
    assert mesh.n_elements == 2 * 32 * 32


def test_phase_sampling_against_reference_predicate(composite_law, rng):
    # element phases must equal an independently coded centroid test
    eps = 0.125
    mesh = build_dns_mesh(UNIT, eps, 8, SQUARE)
    idx = rng.integers(0, mesh.n_elements, 1000)
    half = 0.5 * np.sqrt(0.25)
    for e in idx:
        y = (mesh.centroids[e] / eps) % 1.0
        inside = (abs(y[0] - 0.5) <= half) and (abs(y[1] - 0.5) <= half)
        assert mesh.element_phase[e] == (1 if inside else 0)


def test_homogeneous_material_matches_macro_scheme(uniform_law):
    # identical scheme on the same mesh: table-interpolated effective
    # coefficients reduce to the law itself for a one-phase medium
    cell_mesh = assign_phases(unit_cell_mesh(8), SQUARE)
    table = build_table(cell_mesh, uniform_law, (300.0, 700.0), n_points=3)
    cfg = config(eps=0.25, epc=8, steps=8, T=0.008, law=uniform_law)
    mesh, dns_traj = solve_dns(cfg)
    macro_traj = run_trajectory(mesh, TableCoefficients(table), cfg.data,
                                cfg.grid)
    assert np.abs(dns_traj.u - macro_traj.u).max() < 1e-8 * 300.0
    assert np.abs(dns_traj.phi - macro_traj.phi).max() < 1e-8


def test_constant_state_preserved(composite_law):
    cfg = DnsConfig(epsilon=0.5, elements_per_cell=4,
                    grid=TimeGrid(T=0.01, steps=5), law=composite_law,
                    inclusion=SQUARE,
                    data=ProblemData(f_u=constant(0.0), f_phi=constant(0.0),
                                     u_bc=constant(300.0),
                                     phi_bc=constant(0.0),
                                     u_init=lambda p: np.full(len(p), 300.0)))
    _, traj = solve_dns(cfg)
    assert np.abs(traj.u - 300.0).max() < 1e-9
    assert np.abs(traj.phi).max() < 1e-12


def test_energy_identity_per_electric_step(composite_law):
    cfg = config(eps=0.25, epc=16, steps=5, T=0.005, law=composite_law)
    mesh, traj = solve_dns(cfg)
    provider = PhaseLawCoefficients(composite_law)
    nodes = np.asarray(sorted(mesh.boundary_markers))
    for n in range(1, cfg.grid.steps):
        u_hat = extrapolate_mid(traj.u[n], traj.u[n - 1])
        coeffs = provider(mesh, u_hat)
        a = fem.assemble_stiffness(mesh, coeffs.sigma)
        b = fem.assemble_load(mesh, 200.0)
        a_c, b_c = fem.apply_dirichlet(a, b, nodes, np.zeros(len(nodes)))
        phi = traj.phi[n + 1]
        assert abs(phi @ (a_c @ phi) - b_c @ phi) <= 1e-8 * abs(b_c @ phi)


def test_self_convergence_under_cell_refinement(composite_law):
    finals = {}
    for epc in (4, 8, 16):
        cfg = config(eps=0.25, epc=epc, steps=5, T=0.005, law=composite_law)
        finals[epc] = solve_dns(cfg)
    m16, t16 = finals[16]
    diffs = []
    for epc in (4, 8):
        mesh, traj = finals[epc]
        on_fine = mesh.interpolate(traj.u[-1], m16.nodes)
        mass = fem.assemble_mass(m16, 1.0)
        d = on_fine - t16.u[-1]
        diffs.append(float(np.sqrt(d @ (mass @ d))))
    assert diffs[1] < diffs[0]


def test_picard_close_to_extrapolated(composite_law):
    base = config(eps=0.25, epc=8, steps=10, T=0.01, law=composite_law)
    _, traj_e = solve_dns(base)
    pic = config(eps=0.25, epc=8, steps=10, T=0.01, law=composite_law,
                 linearization="picard", picard_tol=1e-12)
    _, traj_p = solve_dns(pic)
    # both are consistent discretizations; they differ at the size of the
    # linearization gap, far below the fields themselves
    rel = (np.abs(traj_p.u - traj_e.u).max()
           / np.abs(traj_e.u - 300.0).max())
    assert rel < 1e-3


def test_unknown_linearization_rejected(composite_law):
    cfg = config(law=composite_law, linearization="newton")
    with pytest.raises(ValueError):
        solve_dns(cfg)
