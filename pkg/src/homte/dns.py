"""Direct fine-mesh reference solver for the oscillatory-coefficient system.

Runs the same mixed time scheme as the macroscopic solver but on a mesh
resolving every microcell, with coefficients re-evaluated element-wise
from the phase laws.  With the default (extrapolated) linearization the
march is step-for-step the scheme of :mod:`homte.macro`, so differences
against reconstructed multiscale fields isolate the model error rather
than the time discretization; the Picard mode exists to bound the
linearization error itself.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DiscretizationError
from .macro import (PhaseLawCoefficients, ProblemData, SolverOptions,
                    TimeGrid, run_trajectory)
from .mesh import InclusionSpec, assign_phases, build_structured_mesh


@dataclass
class DnsConfig:
    epsilon: float
    elements_per_cell: int
    grid: TimeGrid
    law: object
    inclusion: InclusionSpec
    data: ProblemData
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    linearization: str = "extrapolated"
    picard_max_iter: int = 30
    picard_tol: float = 1e-10
    solver: SolverOptions = field(default_factory=SolverOptions)


def build_dns_mesh(domain, epsilon, elements_per_cell, inclusion):
    """Fine mesh resolving each microcell with a fixed element budget."""
    span = domain[1] - domain[0]
    cells = span / epsilon
    if abs(cells - round(cells)) > 1e-9 * max(1.0, cells):
        raise DiscretizationError(
            f"period {epsilon} does not tile the domain span {span}")
    if abs((domain[3] - domain[2]) - span) > 1e-12 * max(1.0, span):
        raise DiscretizationError("only square domains are supported")
    n = int(round(cells)) * elements_per_cell
    mesh = build_structured_mesh(domain, n)
    return assign_phases(mesh, inclusion, period=epsilon)


def solve_dns(config):
    """Trajectory of the fine-scale temperature and potential fields."""
    mesh = build_dns_mesh(config.domain, config.epsilon,
                          config.elements_per_cell, config.inclusion)
    provider = PhaseLawCoefficients(config.law)
    picard = None
    if config.linearization == "picard":
        picard = (config.picard_max_iter, config.picard_tol)
    elif config.linearization != "extrapolated":
        raise ValueError(f"unknown linearization {config.linearization!r}")
    traj = run_trajectory(mesh, provider, config.data, config.grid,
                          config.solver, picard)
    return mesh, traj
