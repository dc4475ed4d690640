"""
Run configuration files (JSON).

Example::

    {
      "example": "EX1",
      "mesh": {"box": [[-1.25, -1.25, -1.25], [1.25, 1.25, 1.25]], "shape": [17, 17, 17]},
      "perturb": {"amplitude": 0.1, "seed": 3},
      "gamma": {"type": "sphere", "center": [0, 0, 0], "radius": 0.6},
      "schedule": {"n_stages": 5, "eta": 1e-8, "k_max": 200},
      "solver": {"method": "bicgstab", "preconditioner": "ilu0", "rtol": 1e-12},
      "levels": [17, 25, 33],
      "output": "runs/ex1",
      "threads": 1,
      "mode": "study"
    }

Keys left out fall back to the named example, then to defaults.  A mesh may
instead be read from a poly-mesh file with ``{"file": "path"}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import gamma as G
from .generators import Box, BoxMinusBox
from .linsolve import SolverConfig
from .study import Problem, example

MODES = ("single", "study")


class ConfigError(ValueError):
    pass


def domain_from_dict(d):
    try:
        outer = Box(tuple(d["box"][0]), tuple(d["box"][1]))
        if "cut" in d and d["cut"] is not None:
            return BoxMinusBox(outer, Box(tuple(d["cut"][0]), tuple(d["cut"][1])))
        return outer
    except (KeyError, IndexError, TypeError) as exc:
        raise ConfigError(f"bad domain description: {exc}") from None


def domain_to_dict(dom):
    if isinstance(dom, BoxMinusBox):
        return {"box": [list(dom.outer.lo), list(dom.outer.hi)], "cut": [list(dom.cut.lo), list(dom.cut.hi)]}
    return {"box": [list(dom.lo), list(dom.hi)]}


def _vec(x, name):
    if x is None or len(x) != 3:
        raise ConfigError(f"{name} needs three components")
    return tuple(float(v) for v in x)


def gamma_from_dict(d, domain=None) -> G.Gamma:
    """Build a source set from ``{"type": ..., parameters}``."""
    kind = str(d.get("type", "")).lower()
    normal = _vec(d.get("normal", (0, 0, 1)), "normal")
    if kind == "sphere":
        return G.Sphere(_vec(d.get("center"), "center"), float(d["radius"]))
    if kind == "circle":
        return G.Circle(_vec(d.get("center"), "center"), float(d["radius"]), normal)
    if kind == "disk":
        return G.Disk(_vec(d.get("center"), "center"), float(d["radius"]), normal)
    if kind == "square":
        return G.Square(_vec(d.get("center"), "center"), float(d["side"]), normal)
    if kind == "patch":
        return G.PlanePatch.on_plane(int(d["axis"]), float(d["offset"]), d["lo"], d["hi"])
    if kind in ("union", "patch_union", "square_pair"):
        members = [gamma_from_dict(m, domain) for m in d.get("members", [])]
        if kind == "square_pair" and len(members) != 2:
            raise ConfigError("square_pair needs exactly two members")
        return G.Union(tuple(members))
    if kind == "boundary":
        if domain is None:
            raise ConfigError("whole-boundary source needs an analytic domain")
        return G.WholeBoundary(domain)
    raise ConfigError(f"unknown source type {kind!r}")


def _parse_shape(s):
    if isinstance(s, int):
        return (s,) * 3
    if isinstance(s, str):
        parts = [int(p) for p in s.lower().replace("x", ",").split(",") if p.strip()]
        return parts[0] if len(parts) == 1 else tuple(parts)
    s = tuple(int(v) for v in s)
    if len(s) != 3:
        raise ConfigError("mesh shape needs three counts")
    return s


def parse_levels(text):
    """``"16,24,32"`` or ``"12x12x4;24x24x8"`` to a list of shapes."""
    if isinstance(text, (list, tuple)):
        return [_parse_shape(s) for s in text]
    text = text.strip()
    if ";" in text or "x" in text.lower():
        return [_parse_shape(s) for s in text.split(";") if s.strip()]
    return [int(s) for s in text.split(",") if s.strip()]


@dataclass
class RunConfig:
    problem: Problem
    shape: tuple | int | None = None
    mesh_file: str | None = None
    amplitude: float = 0.0
    seed: int = 0
    schedule: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: str = "eikonal_out"
    threads: int | None = None
    mode: str = "single"
    oracle_factor: int = 4

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.mode == "study" and len(self.problem.levels) < 2:
            raise ConfigError("a convergence study needs at least two levels")
        if not 0.0 <= self.amplitude <= 0.3:
            raise ConfigError("perturbation amplitude must lie in [0, 0.3]")

    @property
    def level_shape(self):
        return self.shape if self.shape is not None else self.problem.levels[0]


def load_config(source) -> RunConfig:
    """From a path, a JSON string or a dict."""
    if isinstance(source, dict):
        d = dict(source)
    else:
        p = Path(source)
        text = p.read_text() if p.exists() else str(source)
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
    return config_from_dict(d)


def config_from_dict(d) -> RunConfig:
    known = {"example", "mesh", "perturb", "gamma", "schedule", "solver", "levels", "output",
             "threads", "mode", "oracle_factor", "name"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    base = example(d["example"]) if "example" in d else None
    mesh = d.get("mesh", {}) or {}
    if "box" in mesh:
        domain = domain_from_dict(mesh)
    elif base is not None:
        domain = base.domain
    elif "file" in mesh:
        domain = None
    else:
        raise ConfigError("config needs an example or a mesh domain")
    if "gamma" in d:
        gam = gamma_from_dict(d["gamma"], domain)
    elif base is not None:
        gam = base.gamma
    else:
        raise ConfigError("config needs a source set")
    if "levels" in d:
        levels = tuple(parse_levels(d["levels"]))
    elif base is not None:
        levels = base.levels
    elif "shape" in mesh:
        levels = (_parse_shape(mesh["shape"]),)
    else:
        levels = ()
    name = d.get("name") or (base.name if base is not None else "custom")
    problem = Problem(name, domain, gam, levels)
    pert = d.get("perturb", {}) or {}
    sched = dict(d.get("schedule", {}) or {})
    if set(sched) - {"n_stages", "eta", "k_max"}:
        raise ConfigError("schedule accepts n_stages, eta, k_max")
    try:
        solver = SolverConfig(**(d.get("solver", {}) or {}))
    except TypeError as exc:
        raise ConfigError(f"bad solver settings: {exc}") from None
    return RunConfig(
        problem=problem,
        shape=_parse_shape(mesh["shape"]) if "shape" in mesh else None,
        mesh_file=mesh.get("file"),
        amplitude=float(pert.get("amplitude", 0.0)),
        seed=int(pert.get("seed", 0)),
        schedule=sched,
        solver=solver,
        output=str(d.get("output", "eikonal_out")),
        threads=d.get("threads"),
        mode=str(d.get("mode", "single")),
        oracle_factor=int(d.get("oracle_factor", 4)),
    )


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    kw = {k: v for k, v in kw.items() if v is not None}
    if "levels" in kw:
        kw["problem"] = replace(cfg.problem, levels=tuple(kw.pop("levels")))
    return replace(cfg, **kw)
