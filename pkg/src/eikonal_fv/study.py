"""
Convergence studies against exact or geodesic reference distances.

A :class:`Problem` couples an analytic domain with a source set and a list
of refinement levels.  :func:`run_convergence_study` solves every level,
measures errors at cell centers (seeded cells excluded) and reports the
experimental orders of convergence.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import gamma as G
from .driver import EikonalSolver, StageSchedule
from .generators import Box, BoxMinusBox, box_hex_mesh, perturb_mesh
from .linsolve import SolverConfig
from .oracle import GeodesicOracle, refined_shape

logger = logging.getLogger(__name__)

REPORT_VERSION = 1
ORACLES = ("exact", "geodesic")


class OracleUnavailable(ValueError):
    pass


# ----------------------------------------------------------------------
def compute_eoc(errors, h):
    """
    Experimental orders ``log(E[l+1]/E[l]) / log(h[l+1]/h[l])``.

    >>> round(compute_eoc([2.00e-3, 5.79e-4], [9.91e-2, 5.63e-2])[0], 2)
    2.2
    """
    e = np.asarray(errors, dtype=float)
    h = np.asarray(h, dtype=float)
    if e.shape != h.shape or e.ndim != 1:
        raise ValueError("errors and h must be 1-D of equal length")
    if len(e) < 2:
        return []
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and h must be positive")
    return (np.log(e[1:] / e[:-1]) / np.log(h[1:] / h[:-1])).tolist()


def error_norms(volumes, u, reference, exclude=None):
    """
    Volume-weighted L1 and max errors.

    Parameters
    ----------
    volumes, u, reference : (n,) arrays
    exclude : (n,) bool array, optional
        Cells left out (seeded cells).
    """
    err = np.abs(np.asarray(u) - np.asarray(reference))
    keep = np.ones(len(err), dtype=bool) if exclude is None else ~np.asarray(exclude, dtype=bool)
    if not keep.any():
        raise ValueError("no cells left for the error norm")
    v = np.asarray(volumes)[keep]
    return float(np.sum(v * err[keep]) / np.sum(v)), float(err[keep].max())


# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Problem:
    """Domain, source set and refinement levels of a benchmark."""

    name: str
    domain: object
    gamma: G.Gamma
    levels: tuple
    description: str = ""

    @property
    def oracle(self) -> str:
        return "geodesic" if isinstance(self.domain, BoxMinusBox) else "exact"


R1, R2 = 1.25, 10.0
GAMMA1, GAMMA2 = R1 / 15, R2 / 15


def _c_domain():
    g = GAMMA1
    return BoxMinusBox(Box((-15 * g, -15 * g, -5 * g), (15 * g, 15 * g, 5 * g)),
                       Box((-5 * g, -5 * g, -5 * g), (15 * g, 5 * g, 5 * g)))


def _c_levels():
    return ((12, 12, 4), (24, 24, 8), (36, 36, 12))


def _cube_levels():
    return (16, 24, 32)


def _upper_right():
    g = GAMMA1
    return G.PlanePatch.on_plane(0, 15 * g, (5 * g, -5 * g), (15 * g, 5 * g))


def _lower_right():
    g = GAMMA1
    return G.PlanePatch.on_plane(0, 15 * g, (-15 * g, -5 * g), (-5 * g, 5 * g))


def example(name: str) -> Problem:
    """Benchmark presets ``EX1`` .. ``EX10``."""
    key = name.upper()
    g = GAMMA1
    cube = Box((-R2 / 2,) * 3, (R2 / 2,) * 3)
    side = 7 * GAMMA2
    if key == "EX1":
        return Problem("EX1", Box((-R1,) * 3, (R1,) * 3), G.Sphere((0.0, 0.0, 0.0), 0.6),
                       (17, 25, 33), "sphere r=0.6 in a cube")
    if key == "EX2":
        dom = BoxMinusBox(Box((-8 * g, -15 * g, -15 * g), (22 * g, 15 * g, 15 * g)),
                          Box((8 * g, -15 * g, -5 * g), (15 * g, 15 * g, 5 * g)))
        return Problem("EX2", dom, G.Sphere((0.0, 0.0, 0.0), 0.3), ((30, 30, 30), (60, 60, 60)),
                       "sphere r=0.3 in a slotted box")
    if key == "EX3":
        return Problem("EX3", _c_domain(), _upper_right(), _c_levels(), "one end face of a C-shaped channel")
    if key == "EX4":
        return Problem("EX4", _c_domain(), G.PatchUnion([_upper_right(), _lower_right()]), _c_levels(),
                       "both end faces of a C-shaped channel")
    if key == "EX5":
        dom = _c_domain()
        # coarser grids seed every cell
        return Problem("EX5", dom, G.WholeBoundary(dom), ((24, 24, 8), (36, 36, 12), (48, 48, 16)),
                       "whole boundary of a C-shaped channel")
    if key == "EX6":
        return Problem("EX6", cube, G.WholeBoundary(cube), _cube_levels(), "whole boundary of a cube")
    if key == "EX7":
        return Problem("EX7", cube, G.Circle((0.0, 0.0, 0.0), 0.6, (0.0, 0.0, 1.0)), (24, 32, 48),
                       "circle r=0.6")
    if key == "EX8":
        return Problem("EX8", cube, G.Disk((0.0, 0.0, 0.0), 0.6, (0.0, 0.0, 1.0)), (24, 32, 48),
                       "disk r=0.6")
    if key == "EX9":
        return Problem("EX9", cube, G.Square((0.0, 0.0, 0.0), side, (0.0, 0.0, 1.0)), _cube_levels(),
                       "square in the midplane")
    if key == "EX10":
        z = 7.5 * GAMMA2
        h = side / 2
        pair = G.SquarePair(G.PlanePatch.on_plane(2, z, (-h, -h), (h, h)),
                            G.PlanePatch.on_plane(2, -z, (-h, -h), (h, h)))
        return Problem("EX10", cube, pair, _cube_levels(), "squares on the top and bottom faces")
    raise KeyError(f"unknown example {name!r}; choose EX1..EX10")


EXAMPLES = tuple(f"EX{i}" for i in range(1, 11))


# ----------------------------------------------------------------------
@dataclass
class LevelResult:
    level: int
    shape: tuple
    cells: int
    h: float
    e1: float
    einf: float
    iterations: list
    seconds: float
    stage_errors: list = field(default_factory=list)  # (E1, Einf) after each stage


@dataclass
class ErrorReport:
    problem: str
    oracle: str
    levels: list

    @property
    def h(self):
        return [lv.h for lv in self.levels]

    @property
    def e1(self):
        return [lv.e1 for lv in self.levels]

    @property
    def einf(self):
        return [lv.einf for lv in self.levels]

    @property
    def eoc_l1(self):
        return compute_eoc(self.e1, self.h)

    @property
    def eoc_linf(self):
        return compute_eoc(self.einf, self.h)

    def to_csv(self, repro: bool = False) -> str:
        """CSV text; wall times are left out in reproducibility mode."""
        buf = io.StringIO()
        buf.write(f"# eikonal_fv error report v{REPORT_VERSION} problem={self.problem} oracle={self.oracle}\n")
        w = csv.writer(buf, lineterminator="\n")
        cols = ["level", "cells", "h", "E1", "EOC_E1", "Einf", "EOC_Einf", "K"]
        if not repro:
            cols.append("seconds")
        w.writerow(cols)
        e1, ei = self.eoc_l1, self.eoc_linf
        for i, lv in enumerate(self.levels):
            row = [lv.level, lv.cells, _g(lv.h), _g(lv.e1), _g(e1[i - 1]) if i else "",
                   _g(lv.einf), _g(ei[i - 1]) if i else "", " ".join(map(str, lv.iterations))]
            if not repro:
                row.append(f"{lv.seconds:.3f}")
            w.writerow(row)
        return buf.getvalue()

    def write_csv(self, path, repro: bool = False):
        Path(path).write_text(self.to_csv(repro))
        return Path(path)

    def table(self) -> str:
        """Fixed-width table with columns L, cells, h, E1, EOC, Einf, EOC."""
        lines = [f"{self.problem} (reference: {self.oracle})",
                 f"{'L':>2} {'cells':>8} {'h':>10} {'E1':>10} {'EOC':>6} {'Einf':>10} {'EOC':>6}"]
        e1, ei = self.eoc_l1, self.eoc_linf
        for i, lv in enumerate(self.levels):
            a = f"{e1[i - 1]:6.2f}" if i else f"{'-':>6}"
            b = f"{ei[i - 1]:6.2f}" if i else f"{'-':>6}"
            lines.append(f"{lv.level:>2} {lv.cells:>8} {lv.h:10.3e} {lv.e1:10.3e} {a} {lv.einf:10.3e} {b}")
        return "\n".join(lines)


def _g(x):
    return format(float(x), ".17g")


# ----------------------------------------------------------------------
@dataclass(frozen=True)
class StudySettings:
    schedule: dict = field(default_factory=dict)  # overrides for StageSchedule
    solver: SolverConfig = field(default_factory=SolverConfig)
    amplitude: float = 0.0
    seed: int = 0
    oracle_factor: int = 4
    keep_stage_errors: bool = False


def make_mesh(domain, shape, amplitude=0.0, seed=0, gamma=None):
    """Generated hex mesh, optionally perturbed; vertices of cells meeting ``gamma`` stay put."""
    mesh = box_hex_mesh(domain, shape)
    if amplitude:
        frozen = None
        if gamma is not None:
            frozen = np.zeros(mesh.n_vertices, dtype=bool)
            for p in np.flatnonzero(gamma.cell_mask(mesh)):
                frozen[mesh.cell_vertices(p)] = True
        mesh = perturb_mesh(mesh, amplitude, seed, frozen)
    return mesh


def reference_distance(problem: Problem, points, finest_shape=None, oracle_factor=4, _cache=None):
    """Reference distances at ``points`` for a problem's domain."""
    if problem.oracle == "exact":
        if not isinstance(problem.domain, Box):
            raise OracleUnavailable(_unsupported(problem.domain))
        return problem.gamma.distance(points)
    if not isinstance(problem.domain, BoxMinusBox):
        raise OracleUnavailable(_unsupported(problem.domain))
    if _cache is not None and "oracle" in _cache:
        orc = _cache["oracle"]
    else:
        orc = GeodesicOracle(problem.domain, problem.gamma, refined_shape(finest_shape, oracle_factor))
        if _cache is not None:
            _cache["oracle"] = orc
    return orc(points)


def _unsupported(domain):
    return (f"no reference distance for domain {type(domain).__name__}; supported pairs: "
            "Box with any source set (exact), BoxMinusBox with any source set (geodesic)")


def run_convergence_study(problem: Problem, settings: StudySettings | None = None,
                          levels=None) -> ErrorReport:
    """Solve ``problem`` on every level and collect errors and orders."""
    settings = settings or StudySettings()
    levels = tuple(levels or problem.levels)
    if not isinstance(problem.domain, (Box, BoxMinusBox)):
        raise OracleUnavailable(_unsupported(problem.domain))
    shapes = [(s,) * 3 if isinstance(s, (int, np.integer)) else tuple(s) for s in levels]
    finest = max(shapes, key=lambda s: np.prod(s))
    cache = {}
    results = []
    for i, shape in enumerate(shapes, start=1):
        t0 = time.perf_counter()
        mesh = make_mesh(problem.domain, shape, settings.amplitude, settings.seed, problem.gamma)
        solver = EikonalSolver(mesh, problem.gamma, settings.solver)
        sched = StageSchedule.for_mesh(mesh, **settings.schedule)
        res = solver.run(sched, keep_fields=settings.keep_stage_errors)
        seconds = time.perf_counter() - t0
        ref = reference_distance(problem, mesh.cell_centers, finest, settings.oracle_factor, cache)
        e1, einf = error_norms(mesh.cell_volumes, res.u, ref, res.pinned)
        stage_errors = []
        if settings.keep_stage_errors:
            stage_errors = [error_norms(mesh.cell_volumes, s.field, ref, res.pinned) for s in res.stages]
        logger.info("level=%d cells=%d h=%.6e E1=%.6e Einf=%.6e K=%s seconds=%.2f",
                    i, mesh.n_cells, mesh.h, e1, einf, res.iterations, seconds)
        results.append(LevelResult(i, shape, mesh.n_cells, mesh.h, e1, einf, res.iterations,
                                   seconds, stage_errors))
    return ErrorReport(problem.name, problem.oracle, results)


def with_levels(problem: Problem, levels) -> Problem:
    return replace(problem, levels=tuple(levels))


__all__ = [
    "compute_eoc", "error_norms", "Problem", "example", "EXAMPLES", "LevelResult", "ErrorReport",
    "StudySettings", "run_convergence_study", "reference_distance", "make_mesh", "OracleUnavailable",
    "with_levels",
]
