"""Experiment configuration: TOML file plus command-line overrides.

One file drives every subcommand.  Sections: [geometry], [materials.matrix],
[materials.inclusion], [discretization], [time], [offline], [solver],
[output], [toggles].  Material properties are (intercept, slope) pairs of
affine-in-temperature laws.  CLI ``--set section.key=value`` entries
override file keys.
"""

import ast
import copy
from dataclasses import dataclass, field

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .materials import AffineLaw, MaterialLaw, PhaseLaws
from .mesh import InclusionSpec

DEFAULTS = {
    "geometry": {
        "domain": [0.0, 1.0, 0.0, 1.0],
        "inclusion_shape": "centered_square",
        "volume_fraction": 0.25,
        "epsilon": 0.125,
    },
    "materials": {
        "matrix": {"rho": [0.008, 0.0], "c": [562.5, 0.0],
                   "k": [4.0, 0.0004], "sigma": [300.0, -0.015]},
        "inclusion": {"rho": [0.002, 0.0], "c": [750.0, 0.0],
                      "k": [0.04, 0.000004], "sigma": [0.075, -0.00001]},
    },
    "discretization": {
        "cell_n": 24,
        "macro_n": 32,
        "dns_elements_per_cell": 12,
    },
    "time": {"T": 0.1, "steps": 100},
    "offline": {
        "u_min": 300.0,
        "u_max": 1000.0,
        "n_points": 8,
        "bc_mode": "dirichlet",
        "table_dir": "offline_table",
    },
    "solver": {
        "tol": 1e-10,
        "maxiter": 20000,
        "method": "auto",
        "direct_limit": 150000,
        "compat_tol": 1e-6,
        "picard_max_iter": 30,
        "picard_tol": 1e-10,
    },
    "sources": {
        "f_u": 20000.0,
        "f_phi": 200.0,
        "u_boundary": 300.0,
        "phi_boundary": 0.0,
        "u_initial": 300.0,
    },
    "output": {
        "workspace": "runs/default",
        "vtk_stride": 0,          # 0: final level only
        "errors_csv": "errors.csv",
    },
    "toggles": {
        "gradient_families": True,
        "picard": False,
    },
}


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def section(self, name):
        return self.raw[name]

    def __getitem__(self, dotted):
        node = self.raw
        for part in dotted.split("."):
            node = node[part]
        return node

    def material_law(self):
        mats = self.raw["materials"]
        phases = []
        for name in ("matrix", "inclusion"):
            props = mats[name]
            phases.append(PhaseLaws(
                rho=AffineLaw(*props["rho"]), c=AffineLaw(*props["c"]),
                k=AffineLaw(*props["k"]), sigma=AffineLaw(*props["sigma"])))
        off = self.raw["offline"]
        return MaterialLaw(phases, u_range=(off["u_min"], off["u_max"]))

    def inclusion(self):
        geo = self.raw["geometry"]
        return InclusionSpec(geo["inclusion_shape"], geo["volume_fraction"])


def _merge(base, update):
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value


def load_config(path=None, overrides=()):
    """Defaults, then the TOML file, then ``--set`` overrides, in that order."""
    cfg = ExperimentConfig()
    if path is not None:
        with open(path, "rb") as fh:
            _merge(cfg.raw, tomllib.load(fh))
    for item in overrides:
        key, _, value = item.partition("=")
        if not _:
            raise ValueError(f"override {item!r} is not of the form key=value")
        node = cfg.raw
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        try:
            node[parts[-1]] = ast.literal_eval(value.strip())
        except (ValueError, SyntaxError):
            node[parts[-1]] = value.strip()
    return cfg
