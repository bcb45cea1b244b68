"""Experiment orchestration: the two-stage pipeline, error reports on disk,
convergence sweeps and wall-time accounting.

The pipeline is: offline table (built once, reused whenever the cell mesh
and law fingerprints match) -> macroscopic trajectory -> reconstruction on
the reference mesh -> fine-scale reference run -> per-level error report.
CSV files are the bit-exact output contract: one row per time level,
floats printed with 17 significant digits, written via temp-and-rename.
"""

import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import dns as dns_mod
from . import errors as err_mod
from . import offline
from .exceptions import TableError
from .macro import (PhaseLawCoefficients, ProblemData, SolverOptions,
                    TableCoefficients, TimeGrid, constant, run_trajectory)
from .materials import AffineLaw, MaterialLaw, PhaseLaws
from .mesh import InclusionSpec, assign_phases, build_structured_mesh, unit_cell_mesh
from .reconstruct import Reconstructor
from .vtkio import write_vtk

ERRORS_HEADER = ("step,time,Terr0,Terr1,Terr2,TErr0,TErr1,TErr2,"
                 "Perr0,Perr1,Perr2,PErr0,PErr1,PErr2")


def fmt(value):
    return f"{value:.17g}"


def write_text_atomic(path, text):
    tmp = f"{os.fspath(path)}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def report_to_csv(report):
    lines = [ERRORS_HEADER]
    for row in report.rows():
        step, rest = row[0], row[1:]
        lines.append(",".join([str(step)] + [fmt(v) for v in rest]))
    return "\n".join(lines) + "\n"


def norms_to_csv(mesh, traj):
    lines = ["step,time,u_l2,u_h1,phi_l2,phi_h1"]
    for m in range(len(traj.u)):
        t = traj.grid.time(m)
        vals = (err_mod.l2_norm(mesh, traj.u[m]),
                err_mod.h1_semi_norm(mesh, traj.u[m]),
                err_mod.l2_norm(mesh, traj.phi[m]),
                err_mod.h1_semi_norm(mesh, traj.phi[m]))
        lines.append(",".join([str(m), fmt(t)] + [fmt(v) for v in vals]))
    return "\n".join(lines) + "\n"


def vtk_levels(steps, stride):
    """Levels to export: every stride-th plus the final one (0: final only)."""
    if stride <= 0:
        return [steps]
    return sorted(set(range(0, steps + 1, stride)) | {steps})


def fit_order(scales, errors):
    """Least-squares slope of log(error) against log(scale)."""
    x = np.log(np.asarray(scales, dtype=np.float64))
    y = np.log(np.asarray(errors, dtype=np.float64))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


# -- configured problem pieces ----------------------------------------------

def problem_data(cfg):
    src = cfg.section("sources")
    return ProblemData(
        f_u=constant(src["f_u"]), f_phi=constant(src["f_phi"]),
        u_bc=constant(src["u_boundary"]), phi_bc=constant(src["phi_boundary"]),
        u_init=lambda pts: np.full(len(pts), float(src["u_initial"])))


def solver_options(cfg):
    s = cfg.section("solver")
    return SolverOptions(tol=s["tol"], maxiter=s["maxiter"],
                         method=s["method"], direct_limit=s["direct_limit"])


def cell_mesh_for(cfg):
    mesh = unit_cell_mesh(cfg["discretization.cell_n"])
    return assign_phases(mesh, cfg.inclusion())


def ensure_table(cfg, workspace=None, force=False):
    """Load the cached offline table when fingerprints match, else build it."""
    law = cfg.material_law()
    mesh = cell_mesh_for(cfg)
    workspace = workspace or cfg["output.workspace"]
    path = os.path.join(workspace, cfg["offline.table_dir"])
    start = time.perf_counter()
    if not force:
        try:
            table = offline.load(path, mesh=mesh, law=law)
            if table.bc_mode == cfg["offline.bc_mode"] and \
                    table.n_points == cfg["offline.n_points"] and \
                    table.include_gradient_families == cfg["toggles.gradient_families"]:
                return table, time.perf_counter() - start, True
        except TableError:
            pass
    table = offline.build_table(
        mesh, law, u_range=(cfg["offline.u_min"], cfg["offline.u_max"]),
        n_points=cfg["offline.n_points"], bc_mode=cfg["offline.bc_mode"],
        include_gradient_families=cfg["toggles.gradient_families"],
        compat_tol=cfg["solver.compat_tol"])
    os.makedirs(workspace, exist_ok=True)
    offline.save(table, path)
    return table, time.perf_counter() - start, False


def macro_mesh_for(cfg):
    return build_structured_mesh(tuple(cfg["geometry.domain"]),
                                 cfg["discretization.macro_n"])


def time_grid(cfg):
    return TimeGrid(T=cfg["time.T"], steps=cfg["time.steps"])


def dns_config(cfg, epsilon=None):
    tg = time_grid(cfg)
    return dns_mod.DnsConfig(
        epsilon=epsilon if epsilon is not None else cfg["geometry.epsilon"],
        elements_per_cell=cfg["discretization.dns_elements_per_cell"],
        grid=tg, law=cfg.material_law(), inclusion=cfg.inclusion(),
        data=problem_data(cfg), domain=tuple(cfg["geometry.domain"]),
        linearization="picard" if cfg["toggles.picard"] else "extrapolated",
        picard_max_iter=cfg["solver.picard_max_iter"],
        picard_tol=cfg["solver.picard_tol"], solver=solver_options(cfg))


# -- full pipeline ------------------------------------------------------------

@dataclass
class StageTimings:
    offline: float
    online_macro: float
    online_reconstruct: float
    dns: float
    offline_cache_hit: bool

    @property
    def multiscale_total(self):
        return self.offline + self.online_macro + self.online_reconstruct

    def as_dict(self):
        return {"offline_s": self.offline, "online_macro_s": self.online_macro,
                "online_reconstruct_s": self.online_reconstruct,
                "dns_s": self.dns, "offline_cache_hit": self.offline_cache_hit,
                "multiscale_total_s": self.multiscale_total}


@dataclass
class ExperimentResult:
    report: err_mod.ErrorReport
    timings: StageTimings
    checks: dict
    workspace: str

    @property
    def passed(self):
        return all(self.checks.values())


def final_time_checks(report, timings=None):
    """The declared pass/fail gates of a comparison run."""
    checks = {
        "terr_ordering": (report.final("Terr2") <= report.final("Terr1")
                          <= report.final("Terr0")),
        "terr_h1_gap": report.final("TErr2") < report.final("TErr1"),
        "perr_h1_gap": report.final("PErr2") < report.final("PErr1"),
    }
    if timings is not None:
        checks["multiscale_faster_than_dns"] = (
            timings.multiscale_total < timings.dns)
    return checks


def run_experiment(cfg, write_outputs=True):
    """Offline table -> macro solve -> reconstruction -> reference -> report."""
    workspace = cfg["output.workspace"]
    os.makedirs(workspace, exist_ok=True)

    table, t_offline, cache_hit = ensure_table(cfg, workspace)

    data = problem_data(cfg)
    solver = solver_options(cfg)
    tg = time_grid(cfg)
    mesh_macro = macro_mesh_for(cfg)

    start = time.perf_counter()
    traj = run_trajectory(mesh_macro, TableCoefficients(table), data, tg, solver)
    t_macro = time.perf_counter() - start

    start = time.perf_counter()
    mesh_dns, traj_dns = dns_mod.solve_dns(dns_config(cfg))
    t_dns = time.perf_counter() - start

    start = time.perf_counter()
    recon = Reconstructor(mesh_macro, table, mesh_dns, cfg["geometry.epsilon"],
                          cfg["toggles.gradient_families"])
    report = err_mod.build_report(recon, traj, mesh_dns, traj_dns)
    t_recon = time.perf_counter() - start

    timings = StageTimings(offline=t_offline, online_macro=t_macro,
                           online_reconstruct=t_recon, dns=t_dns,
                           offline_cache_hit=cache_hit)
    checks = final_time_checks(report, timings)

    if write_outputs:
        write_text_atomic(os.path.join(workspace, cfg["output.errors_csv"]),
                          report_to_csv(report))
        write_text_atomic(os.path.join(workspace, "timings.json"),
                          json.dumps(timings.as_dict(), indent=1,
                                     sort_keys=True) + "\n")
        for m in vtk_levels(tg.steps, cfg["output.vtk_stride"]):
            write_vtk(os.path.join(workspace, f"macro_{m:05d}.vtk"), mesh_macro,
                      point_data={"u": traj.u[m], "phi": traj.phi[m]})
            write_vtk(os.path.join(workspace, f"dns_{m:05d}.vtk"), mesh_dns,
                      point_data={"u": traj_dns.u[m], "phi": traj_dns.phi[m]},
                      cell_data={"phase": mesh_dns.element_phase})
        u2, p2 = recon.fields(traj, tg.steps, "homs")
        u1, p1 = recon.fields(traj, tg.steps, "loms")
        write_vtk(os.path.join(workspace, f"recon_{tg.steps:05d}.vtk"), mesh_dns,
                  point_data={"u_homs": u2, "phi_homs": p2,
                              "u_loms": u1, "phi_loms": p1})

    return ExperimentResult(report=report, timings=timings, checks=checks,
                            workspace=workspace)


# -- manufactured solution (constant coefficients) ----------------------------

def _bump(points):
    x1, x2 = points[:, 0], points[:, 1]
    return x1 * (1.0 - x1) * x2 * (1.0 - x2)


def _bump_laplacian(points):
    x1, x2 = points[:, 0], points[:, 1]
    return -2.0 * x2 * (1.0 - x2) - 2.0 * x1 * (1.0 - x1)


def _bump_grad_sq(points):
    x1, x2 = points[:, 0], points[:, 1]
    gx = (1.0 - 2.0 * x1) * x2 * (1.0 - x2)
    gy = x1 * (1.0 - x1) * (1.0 - 2.0 * x2)
    return gx * gx + gy * gy


def manufactured_problem():
    """Constant-coefficient coupled problem with a known exact solution.

    u(x, t) = 300 + t^2 * b(x) and phi(x) = b(x) for the polynomial bump
    b = x1(1-x1)x2(1-x2); sources follow by substituting into the
    homogenized system (unit capacity and conductivities).  The quadratic
    time dependence gives the time march a non-vanishing truncation error,
    so the second-order rate is observable.
    """
    one = AffineLaw(1.0, 0.0)
    phase = PhaseLaws(rho=one, c=one, k=one, sigma=one)
    law = MaterialLaw([phase, phase], u_range=(250.0, 350.0))

    def f_u(points, t):
        return (2.0 * t * _bump(points) - t * t * _bump_laplacian(points)
                - _bump_grad_sq(points))

    def f_phi(points, t):
        return -_bump_laplacian(points)

    data = ProblemData(
        f_u=f_u, f_phi=f_phi, u_bc=constant(300.0), phi_bc=constant(0.0),
        u_init=lambda pts: np.full(len(pts), 300.0))

    def u_exact(points, t):
        return 300.0 + t * t * _bump(points)

    return law, data, u_exact, _bump


# -- convergence sweeps --------------------------------------------------------

@dataclass
class SweepResult:
    kind: str
    scales: list
    errors: dict       # column name -> list of errors per rung
    order: float
    order_column: str

    def to_csv(self):
        names = sorted(self.errors)
        lines = ["scale," + ",".join(names)]
        for i, s in enumerate(self.scales):
            lines.append(",".join([fmt(s)] + [fmt(self.errors[n][i])
                                              for n in names]))
        lines.append(f"# observed_order({self.order_column}) = {fmt(self.order)}")
        return "\n".join(lines) + "\n"


def sweep_epsilon(cfg, epsilons):
    """Reconstruction error against the fine-scale reference as eps shrinks.

    The offline table and the macroscopic trajectory do not depend on the
    period, so they are computed once and reused for every rung.
    """
    table, _, _ = ensure_table(cfg)
    data = problem_data(cfg)
    solver = solver_options(cfg)
    tg = time_grid(cfg)
    mesh_macro = macro_mesh_for(cfg)
    traj = run_trajectory(mesh_macro, TableCoefficients(table), data, tg, solver)

    errors = {"TErr2": [], "PErr2": [], "Terr2": [], "Perr2": []}
    n_final = tg.steps
    for eps in epsilons:
        mesh_dns, traj_dns = dns_mod.solve_dns(dns_config(cfg, epsilon=eps))
        recon = Reconstructor(mesh_macro, table, mesh_dns, eps,
                              cfg["toggles.gradient_families"])
        u2, p2 = recon.fields(traj, n_final, "homs")
        errors["Terr2"].append(err_mod.relative_error(
            u2, traj_dns.u[n_final], mesh_dns, "l2"))
        errors["TErr2"].append(err_mod.relative_error(
            u2, traj_dns.u[n_final], mesh_dns, "h1_semi"))
        errors["Perr2"].append(err_mod.relative_error(
            p2, traj_dns.phi[n_final], mesh_dns, "l2"))
        errors["PErr2"].append(err_mod.relative_error(
            p2, traj_dns.phi[n_final], mesh_dns, "h1_semi"))
    order = fit_order(epsilons, errors["TErr2"])
    return SweepResult(kind="epsilon", scales=list(epsilons), errors=errors,
                       order=order, order_column="TErr2")


def sweep_dt(cfg, step_counts=(4, 8, 16), reference_steps=128, mesh_n=None):
    """Temporal self-convergence of the manufactured macro run.

    Errors are measured against a small-step reference on the same mesh so
    the spatial discretization error cancels and the time-march order shows
    cleanly.
    """
    law, data, _, _ = manufactured_problem()
    mesh = build_structured_mesh((0.0, 1.0, 0.0, 1.0),
                                 mesh_n or cfg["discretization.macro_n"])
    provider = PhaseLawCoefficients(law)
    solver = solver_options(cfg)
    T = 1.0
    ref = run_trajectory(mesh, provider, data, TimeGrid(T, reference_steps),
                         solver).u[-1]
    dts = []
    errs = []
    for steps in step_counts:
        traj = run_trajectory(mesh, provider, data, TimeGrid(T, steps), solver)
        dts.append(T / steps)
        errs.append(err_mod.l2_norm(mesh, traj.u[-1] - ref))
    order = fit_order(dts, errs)
    return SweepResult(kind="dt", scales=dts, errors={"u_l2": errs},
                       order=order, order_column="u_l2")


def sweep_macro_mesh(cfg, mesh_ns=(8, 16, 32), steps=64):
    """Spatial convergence of the manufactured macro run against the exact
    solution, with the time step held small."""
    law, data, u_exact, _ = manufactured_problem()
    provider = PhaseLawCoefficients(law)
    solver = solver_options(cfg)
    T = 1.0
    hs = []
    errs = []
    for n in mesh_ns:
        mesh = build_structured_mesh((0.0, 1.0, 0.0, 1.0), n)
        traj = run_trajectory(mesh, provider, data, TimeGrid(T, steps), solver)
        exact = u_exact(mesh.nodes, T)
        hs.append(1.0 / n)
        errs.append(err_mod.l2_norm(mesh, traj.u[-1] - exact))
    order = fit_order(hs, errs)
    return SweepResult(kind="macro", scales=hs, errors={"u_l2": errs},
                       order=order, order_column="u_l2")


def sweep_cell_mesh(cfg, mesh_ns=(8, 16, 32), refine_factor=4,
                    bc_mode="dirichlet", u0=300.0):
    """Cell-problem self-convergence on a laminate against a finer reference.

    The corrector is transferred to the reference mesh (exact for nested
    P1 spaces) and the difference is measured there in L2.
    """
    from .cell import solve_first_order

    law = cfg.material_law()
    inclusion = InclusionSpec("laminate_x1", 0.5)
    n_ref = max(mesh_ns) * refine_factor
    mesh_ref = assign_phases(unit_cell_mesh(n_ref), inclusion)
    m_ref, _ = solve_first_order(mesh_ref, law, u0, bc_mode)
    hs = []
    errs = []
    for n in mesh_ns:
        mesh = assign_phases(unit_cell_mesh(n), inclusion)
        m, _ = solve_first_order(mesh, law, u0, bc_mode)
        coarse_on_ref = mesh.interpolate(m[0], mesh_ref.nodes)
        hs.append(1.0 / n)
        errs.append(err_mod.l2_norm(mesh_ref, coarse_on_ref - m_ref[0]))
    order = fit_order(hs, errs)
    return SweepResult(kind="cell", scales=hs, errors={"M1_l2": errs},
                       order=order, order_column="M1_l2")
