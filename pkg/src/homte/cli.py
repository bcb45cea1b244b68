"""Command-line interface.

Every subcommand reads the same TOML config (``-c``) and honours repeated
``--set section.key=value`` overrides.  Commands exit 0 only when their
declared checks pass.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import experiment as exp
from . import offline
from .cell import solve_first_order
from .config import load_config
from .exceptions import HomteError
from .homogenize import check_sigma_star_identity, compute_homogenized
from .macro import TableCoefficients, run_trajectory
from .reconstruct import Reconstructor
from .vtkio import write_vtk


def _add_common(parser):
    parser.add_argument("-c", "--config", default=None,
                        help="path to the experiment TOML file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE",
                        help="override a config entry (repeatable)")


def cmd_offline(cfg, args):
    table, seconds, cache_hit = exp.ensure_table(cfg, force=args.force)
    worst_mean = offline.mean_field_magnitudes(table)
    print(f"offline table: {table.n_points} temperatures on "
          f"[{table.temperatures[0]}, {table.temperatures[-1]}], "
          f"bc={table.bc_mode}, cache_hit={cache_hit}, {seconds:.2f}s")
    print(f"max |cell average| across fields: {worst_mean:.3e}")
    return 0


def cmd_homogenize(cfg, args):
    law = cfg.material_law()
    mesh = exp.cell_mesh_for(cfg)
    temps = np.linspace(cfg["offline.u_min"], cfg["offline.u_max"],
                        args.temperatures)
    print("u0,S_hat,k11,k12,k21,k22,sigma11,sigma12,sigma21,sigma22,"
          "sigma_star_residual")
    for u0 in temps:
        m, n = solve_first_order(mesh, law, float(u0), cfg["offline.bc_mode"])
        h = compute_homogenized(mesh, law, float(u0), m, n)
        residual = check_sigma_star_identity(h).max_rel
        row = ([u0, h.S_hat] + list(h.k_hat.ravel())
               + list(h.sigma_hat.ravel()) + [residual])
        print(",".join(exp.fmt(v) for v in row))
    return 0


def cmd_solve(cfg, args):
    workspace = cfg["output.workspace"]
    os.makedirs(workspace, exist_ok=True)
    table, _, _ = exp.ensure_table(cfg)
    mesh = exp.macro_mesh_for(cfg)
    traj = run_trajectory(mesh, TableCoefficients(table), exp.problem_data(cfg),
                          exp.time_grid(cfg), exp.solver_options(cfg))
    exp.write_text_atomic(os.path.join(workspace, "norms_macro.csv"),
                          exp.norms_to_csv(mesh, traj))
    for m in exp.vtk_levels(traj.grid.steps, cfg["output.vtk_stride"]):
        write_vtk(os.path.join(workspace, f"macro_{m:05d}.vtk"), mesh,
                  point_data={"u": traj.u[m], "phi": traj.phi[m]})
    print(f"macro run: {traj.grid.steps} steps on {mesh.n_nodes} nodes; "
          f"u range [{traj.u[-1].min():.4f}, {traj.u[-1].max():.4f}]")
    return 0


def cmd_dns(cfg, args):
    workspace = cfg["output.workspace"]
    os.makedirs(workspace, exist_ok=True)
    from . import dns as dns_mod
    mesh, traj = dns_mod.solve_dns(exp.dns_config(cfg))
    exp.write_text_atomic(os.path.join(workspace, "norms_dns.csv"),
                          exp.norms_to_csv(mesh, traj))
    for m in exp.vtk_levels(traj.grid.steps, cfg["output.vtk_stride"]):
        write_vtk(os.path.join(workspace, f"dns_{m:05d}.vtk"), mesh,
                  point_data={"u": traj.u[m], "phi": traj.phi[m]},
                  cell_data={"phase": mesh.element_phase})
    print(f"reference run: {traj.grid.steps} steps on {mesh.n_nodes} nodes; "
          f"u range [{traj.u[-1].min():.4f}, {traj.u[-1].max():.4f}]")
    return 0


def cmd_reconstruct(cfg, args):
    workspace = cfg["output.workspace"]
    os.makedirs(workspace, exist_ok=True)
    from . import dns as dns_mod
    table, _, _ = exp.ensure_table(cfg)
    mesh = exp.macro_mesh_for(cfg)
    traj = run_trajectory(mesh, TableCoefficients(table), exp.problem_data(cfg),
                          exp.time_grid(cfg), exp.solver_options(cfg))
    mesh_fine = dns_mod.build_dns_mesh(
        tuple(cfg["geometry.domain"]), cfg["geometry.epsilon"],
        cfg["discretization.dns_elements_per_cell"], cfg.inclusion())
    recon = Reconstructor(mesh, table, mesh_fine, cfg["geometry.epsilon"],
                          cfg["toggles.gradient_families"])
    n = traj.grid.steps
    u, phi = recon.fields(traj, n, args.order)
    write_vtk(os.path.join(workspace, f"recon_{args.order}_{n:05d}.vtk"),
              mesh_fine, point_data={"u": u, "phi": phi})
    print(f"{args.order} reconstruction written for level {n}")
    return 0


def cmd_compare(cfg, args):
    result = exp.run_experiment(cfg)
    print(f"errors written to "
          f"{os.path.join(result.workspace, cfg['output.errors_csv'])}")
    t = result.timings
    print(f"wall time: offline {t.offline:.2f}s (cache_hit={t.offline_cache_hit})"
          f" + macro {t.online_macro:.2f}s + reconstruct "
          f"{t.online_reconstruct:.2f}s vs reference {t.dns:.2f}s")
    for name, ok in result.checks.items():
        print(f"check {name}: {'pass' if ok else 'FAIL'}")
    return 0 if result.passed else 1


def cmd_sweep(cfg, args):
    workspace = cfg["output.workspace"]
    os.makedirs(workspace, exist_ok=True)
    if args.kind == "epsilon":
        eps = [float(e) for e in args.scales.split(",")] if args.scales else \
            [0.25, 0.125, 0.0625]
        result = exp.sweep_epsilon(cfg, eps)
        errs = result.errors["TErr2"]
        ok = all(b < a for a, b in zip(errs, errs[1:])) and result.order >= 0.5
    elif args.kind == "dt":
        result = exp.sweep_dt(cfg)
        ok = 1.8 <= result.order <= 2.2
    elif args.kind == "macro":
        result = exp.sweep_macro_mesh(cfg)
        ok = 1.8 <= result.order <= 2.2
    else:
        result = exp.sweep_cell_mesh(cfg)
        ok = 1.8 <= result.order <= 2.2
    path = os.path.join(workspace, f"rates_{args.kind}.csv")
    exp.write_text_atomic(path, result.to_csv())
    print(result.to_csv(), end="")
    print(f"written to {path}; check: {'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="homte",
        description="two-scale thermo-electric simulation of periodic "
                    "composites")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("offline", help="build or reuse the offline table")
    _add_common(p)
    p.add_argument("--force", action="store_true",
                   help="rebuild even when a matching table is cached")
    p.set_defaults(func=cmd_offline)

    p = sub.add_parser("homogenize",
                       help="print effective coefficients over the range")
    _add_common(p)
    p.add_argument("--temperatures", type=int, default=5)
    p.set_defaults(func=cmd_homogenize)

    p = sub.add_parser("solve", help="run the macroscopic trajectory")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("dns", help="run the fine-scale reference")
    _add_common(p)
    p.set_defaults(func=cmd_dns)

    p = sub.add_parser("reconstruct", help="evaluate multiscale fields")
    _add_common(p)
    p.add_argument("--order", choices=("homogenized", "loms", "homs"),
                   default="homs")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("compare", help="full pipeline and error report")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="convergence sweeps")
    _add_common(p)
    p.add_argument("--kind", choices=("epsilon", "dt", "macro", "cell"),
                   required=True)
    p.add_argument("--scales", default=None,
                   help="comma-separated rung values (epsilon sweep)")
    p.set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)
    cfg = load_config(args.config, args.overrides)
    try:
        return args.func(cfg, args)
    except HomteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
