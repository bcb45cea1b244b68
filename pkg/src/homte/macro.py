"""On-line macroscopic solver: steady electric solves interleaved with a
linearized Crank-Nicolson thermal march.

Each step freezes all temperature-dependent coefficients at the
extrapolated mid-level temperature (3*u^n - u^{n-1})/2, so both
sub-problems are single SPD linear solves.  The first step uses an
implicit half-step predictor instead of the extrapolation.  The same
scheme runs the homogenized problem (coefficients interpolated from the
offline table) and the fine-scale reference (coefficients from the phase
laws), selected through the coefficient provider.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import fem
from .exceptions import SolverError
from .mesh import SIDE_TAGS

DIM = 2


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant time levels 0 = t_0 < ... < t_N = T."""

    T: float
    steps: int

    def __post_init__(self):
        if self.steps < 1 or self.T <= 0.0:
            raise ValueError("need T > 0 and at least one step")

    @property
    def dt(self):
        return self.T / self.steps

    def time(self, n):
        return n * self.dt

    def half_time(self, n):
        return (n + 0.5) * self.dt


def constant(value):
    """Wrap a constant as a (points, t) -> values field."""
    def f(points, t=0.0):
        return np.full(len(points), float(value))
    return f


@dataclass
class ProblemData:
    """Sources, boundary data and initial state of one coupled problem.

    Callables take an (m, 2) point array and the time; flux maps associate
    side tags with callables of the same signature.  Sides not listed in a
    Dirichlet tag tuple and not carrying a flux are natural (zero flux).
    """

    f_u: Callable
    f_phi: Callable
    u_bc: Callable
    phi_bc: Callable
    u_init: Callable
    q_flux: dict = field(default_factory=dict)
    d_flux: dict = field(default_factory=dict)
    u_dirichlet_tags: tuple = SIDE_TAGS
    phi_dirichlet_tags: tuple = SIDE_TAGS


@dataclass
class ElementCoefficients:
    """Per-element coefficient fields for one assembly pass.

    Conductivities are symmetric tensors stored as (E, 3) columns
    (t11, t12, t22); the heat capacity is scalar.
    """

    S: np.ndarray
    k: np.ndarray
    sigma: np.ndarray
    sigma_star: np.ndarray


class TableCoefficients:
    """Effective coefficients interpolated from the offline table.

    Coefficients are evaluated at the nodal temperatures and averaged over
    each element's vertices.
    """

    def __init__(self, table):
        self.table = table

    def __call__(self, mesh, u_nodal):
        rows = self.table.nodal_coefficients(u_nodal)
        elem = rows[mesh.elements].mean(axis=1)

        def sym(block):
            return np.column_stack([block[:, 0],
                                    0.5 * (block[:, 1] + block[:, 2]),
                                    block[:, 3]])

        return ElementCoefficients(S=elem[:, 0], k=sym(elem[:, 1:5]),
                                   sigma=sym(elem[:, 5:9]),
                                   sigma_star=sym(elem[:, 9:13]))


class PhaseLawCoefficients:
    """Oscillatory coefficients evaluated from the phase laws directly.

    The Joule tensor coincides with the electric conductivity at the fine
    scale.  Element temperature is the vertex average, which equals the
    average of vertex coefficient values for affine laws.
    """

    def __init__(self, law):
        self.law = law

    def __call__(self, mesh, u_nodal):
        u_e = np.asarray(u_nodal)[mesh.elements].mean(axis=1)
        phases = mesh.element_phase
        k = self.law.property_values("k", phases, u_e)
        sigma = self.law.property_values("sigma", phases, u_e)
        s = (self.law.property_values("rho", phases, u_e)
             * self.law.property_values("c", phases, u_e))
        zeros = np.zeros_like(k)
        k3 = np.column_stack([k, zeros, k])
        s3 = np.column_stack([sigma, zeros, sigma])
        return ElementCoefficients(S=s, k=k3, sigma=s3, sigma_star=s3)


@dataclass
class MacroTrajectory:
    """Fields produced by one run: u at full levels, phi at half levels.

    ``phi[0]`` is the initial electric solve at t=0; ``phi[m]`` for m >= 1
    is the solve at t_{m-1/2}.  ``u_half_hat`` is the half-step predictor
    used in place of the extrapolation at the first step.
    """

    u: np.ndarray
    phi: np.ndarray
    u_half_hat: np.ndarray
    grid: TimeGrid
    mesh_id: str = ""


@dataclass
class SolverOptions:
    tol: float = 1e-10
    maxiter: int = 20000
    method: str = "auto"
    direct_limit: int = 150000

    def solve(self, system):
        return fem.solve_system(system, tol=self.tol, maxiter=self.maxiter,
                                method=self.method,
                                direct_limit=self.direct_limit)


def _dirichlet_nodes(mesh, tags):
    nodes = sorted({node for node, node_tags in mesh.boundary_markers.items()
                    if any(t in tags for t in node_tags)})
    return np.asarray(nodes, dtype=np.int64)


def _flux_load(mesh, flux_map, t):
    if not flux_map:
        return 0.0
    return fem.assemble_load(mesh, None, {
        tag: (lambda pts, f=f: f(pts, t)) for tag, f in flux_map.items()})


def _joule_source(mesh, sigma_star, phi):
    g = fem.element_gradients(mesh, phi)
    return (sigma_star[:, 0] * g[:, 0] * g[:, 0]
            + 2.0 * sigma_star[:, 1] * g[:, 0] * g[:, 1]
            + sigma_star[:, 2] * g[:, 1] * g[:, 1])


def init_electric(mesh, coeffs, data, t, solver=None):
    """Steady electric solve at frozen temperature-dependent conductivity."""
    solver = solver or SolverOptions()
    matrix = fem.assemble_stiffness(mesh, coeffs.sigma)
    rhs = fem.assemble_load(mesh, lambda p: data.f_phi(p, t))
    rhs = rhs + _flux_load(mesh, data.d_flux, t)
    nodes = _dirichlet_nodes(mesh, data.phi_dirichlet_tags)
    values = data.phi_bc(mesh.nodes[nodes], t)
    system = fem.SparseSystem(matrix, rhs, dirichlet=(nodes, values))
    return solver.solve(system).values


def _thermal_solve(mesh, coeffs, u_prev, phi, data, dt_eff, cn_average,
                   t_source, t_flux, t_bc, solver):
    mass = fem.assemble_mass(mesh, coeffs.S)
    stiff = fem.assemble_stiffness(mesh, coeffs.k)
    rhs = fem.assemble_load(mesh, _joule_source(mesh, coeffs.sigma_star, phi))
    rhs = rhs + fem.assemble_load(mesh, lambda p: data.f_u(p, t_source))
    rhs = rhs + _flux_load(mesh, data.q_flux, t_flux)
    if cn_average:
        matrix = (1.0 / dt_eff) * mass + 0.5 * stiff
        rhs = rhs + (1.0 / dt_eff) * (mass @ u_prev) - 0.5 * (stiff @ u_prev)
    else:
        matrix = (1.0 / dt_eff) * mass + stiff
        rhs = rhs + (1.0 / dt_eff) * (mass @ u_prev)
    nodes = _dirichlet_nodes(mesh, data.u_dirichlet_tags)
    values = data.u_bc(mesh.nodes[nodes], t_bc)
    system = fem.SparseSystem(matrix.tocsr(), rhs, dirichlet=(nodes, values))
    return solver.solve(system).values


def half_step_thermal(mesh, coeffs, u0, phi0, data, grid, solver=None):
    """Implicit half-step predictor with all coefficients frozen at u0."""
    solver = solver or SolverOptions()
    t_half = grid.half_time(0)
    return _thermal_solve(mesh, coeffs, u0, phi0, data, 0.5 * grid.dt,
                          cn_average=False, t_source=t_half, t_flux=t_half,
                          t_bc=t_half, solver=solver)


def extrapolate_mid(u_n, u_prev):
    return (3.0 * u_n - u_prev) / 2.0


def advance_step(mesh, provider, data, grid, u_history, u_hat, n, solver,
                 picard=None):
    """One time step: electric solve at u_hat, then one linear thermal solve.

    Returns (phi at t_{n+1/2}, u at t_{n+1}).  With ``picard`` set to
    (max_iter, tol) the linearization temperature is iterated to the
    Crank-Nicolson average instead of using the extrapolation.
    """
    t_half = grid.half_time(n)
    t_next = grid.time(n + 1)
    u_n = u_history[n]

    def substep(u_lin):
        coeffs = provider(mesh, u_lin)
        try:
            phi = init_electric(mesh, coeffs, data, t_half, solver)
        except SolverError as exc:
            raise SolverError(f"step {n} electric solve: {exc}",
                              residual=exc.residual) from exc
        try:
            u_next = _thermal_solve(mesh, coeffs, u_n, phi, data, grid.dt,
                                    cn_average=True, t_source=t_half,
                                    t_flux=t_next, t_bc=t_next, solver=solver)
        except SolverError as exc:
            raise SolverError(f"step {n} thermal solve: {exc}",
                              residual=exc.residual) from exc
        return phi, u_next

    if picard is None:
        return substep(u_hat)

    max_iter, tol = picard
    u_lin = u_hat
    history = []
    for _ in range(max_iter):
        phi, u_next = substep(u_lin)
        u_new = 0.5 * (u_n + u_next)
        scale = float(np.linalg.norm(u_new))
        change = float(np.linalg.norm(u_new - u_lin))
        history.append(change / scale if scale > 0.0 else change)
        u_lin = u_new
        if history[-1] <= tol:
            return phi, u_next
    raise SolverError(f"picard iteration at step {n} did not reach {tol}; "
                      f"residual history {history}")


def run_trajectory(mesh, provider, data, grid, solver=None, picard=None):
    """Full march: precompute phi0 and the predictor, then N coupled steps."""
    solver = solver or SolverOptions()
    n_nodes = mesh.n_nodes
    u = np.empty((grid.steps + 1, n_nodes))
    phi = np.empty((grid.steps + 1, n_nodes))
    u[0] = data.u_init(mesh.nodes)

    coeffs0 = provider(mesh, u[0])
    phi[0] = init_electric(mesh, coeffs0, data, grid.time(0), solver)
    u_half_hat = half_step_thermal(mesh, coeffs0, u[0], phi[0], data, grid,
                                   solver)

    for n in range(grid.steps):
        u_hat = u_half_hat if n == 0 else extrapolate_mid(u[n], u[n - 1])
        phi[n + 1], u[n + 1] = advance_step(mesh, provider, data, grid, u,
                                            u_hat, n, solver, picard)

    return MacroTrajectory(u=u, phi=phi, u_half_hat=u_half_hat, grid=grid,
                           mesh_id=mesh.fingerprint()[:16])
