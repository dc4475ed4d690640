"""
Staged solver for the distance field.

Stage 1 solves a Poisson-like problem with all gradients zero.  Each later
stage lowers the regularisation to ``h**(n/2)``, freezes the advecting
field from the previous stage and runs deferred-correction iterations until
the mean absolute residual drops below ``eta``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import Discretization, compute_fluxes
from .gamma import Gamma, SeedSet, build_seed_set
from .gradient import FaceGradient, InflowGradient, LeastSquaresGradient
from .linsolve import LinearSolver, SolverConfig
from .mesh import PolyMesh

logger = logging.getLogger(__name__)


class StageError(RuntimeError):
    """A stage hit its iteration cap before the residual fell below ``eta``."""

    def __init__(self, stage, rho, k_max):
        super().__init__(f"stage n={stage} did not converge in {k_max} iterations (rho={rho:.3e})")
        self.stage = stage
        self.rho = rho


class NoDirichletData(ValueError):
    pass


@dataclass(frozen=True)
class StageSchedule:
    """Regularisation schedule ``eps_n = h**(n/2)`` for ``n = 1..n_stages``."""

    h: float
    n_stages: int = 5
    eta: float = 1e-8
    k_max: int = 200

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.n_stages < 1:
            raise ValueError("need at least one stage")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")

    @classmethod
    def for_mesh(cls, mesh: PolyMesh, **kw) -> "StageSchedule":
        return cls(h=mesh.h, **kw)

    def eps(self, n: int) -> float:
        return self.h ** (0.5 * n)

    @property
    def epsilons(self):
        return [self.eps(n) for n in range(1, self.n_stages + 1)]


@dataclass
class StageResult:
    n: int
    eps: float
    iterations: int
    residuals: list
    inner_iterations: list
    seconds: float = 0.0
    field: np.ndarray | None = None


@dataclass
class SolveResult:
    u: np.ndarray
    stages: list
    seeds: SeedSet
    schedule: StageSchedule
    pinned: np.ndarray = field(repr=False, default=None)

    @property
    def iterations(self):
        """``K_n`` per stage."""
        return [s.iterations for s in self.stages]

    @property
    def total_iterations(self):
        return int(sum(self.iterations))


class EikonalSolver:
    """
    Geometry-dependent operators for one (mesh, source set) pair.

    Parameters
    ----------
    mesh : PolyMesh
    gamma : Gamma
        Source set.
    solver : SolverConfig, optional
    seeds : SeedSet, optional
        Precomputed seed set (built from ``gamma`` otherwise).
    """

    def __init__(self, mesh: PolyMesh, gamma: Gamma, solver: SolverConfig | None = None,
                 seeds: SeedSet | None = None):
        self.mesh = mesh
        self.gamma = gamma
        self.config = solver or SolverConfig()
        self.seeds = seeds if seeds is not None else build_seed_set(mesh, gamma)
        if len(self.seeds) == 0:
            raise NoDirichletData("no Dirichlet data")
        n = mesh.n_cells
        self.pinned = self.seeds.mask(n)
        self.dirichlet_mask = gamma.dirichlet_tris(mesh)
        dvals = np.zeros(mesh.n_tris)
        dt = np.flatnonzero(self.dirichlet_mask)
        dvals[dt] = gamma.distance(mesh.tri_centers[dt])
        self.disc = Discretization(mesh, self.pinned, self.seeds.full_values(n),
                                   self.dirichlet_mask, dvals)
        self.cell_gradient = LeastSquaresGradient(mesh, dt)
        self._u_dirichlet = dvals[dt]
        self.face_gradient = FaceGradient(mesh)

    def gradient(self, u):
        return self.cell_gradient(u, self._u_dirichlet)

    def fluxes(self, u):
        """Frozen normal fluxes from a field."""
        return compute_fluxes(self.mesh, self.face_gradient(self.gradient(u)))

    # ------------------------------------------------------------------
    def stage1(self, eps: float):
        """Single solve of the zero-gradient problem; returns ``(u, inner iterations)``."""
        m = self.mesh
        mu = np.zeros(m.n_tris)
        zeros = np.zeros((m.n_cells, 3))
        A = self.disc.matrix(eps, mu)
        f = self.disc.rhs(eps, mu, zeros, zeros)
        lin = LinearSolver(A, self.config)
        u = lin.solve(f, x0=self.disc.pinned_values.copy())
        return u, lin.last_iterations

    def stage(self, n: int, eps: float, u_prev, eta: float, k_max: int, log=True):
        """Deferred-correction iterations of one stage ``n >= 2``."""
        mu = self.fluxes(u_prev)
        A = self.disc.matrix(eps, mu)
        lin = LinearSolver(A, self.config)
        inflow = InflowGradient(self.mesh, mu, self.dirichlet_mask, self.face_gradient)

        def explicit(u):
            g = self.gradient(u)
            return self.disc.rhs(eps, mu, g, inflow(self.face_gradient(g)))

        u = u_prev
        f = explicit(u)
        residuals, inner = [], []
        for k in range(1, k_max + 1):
            u = lin.solve(f, x0=u)
            f = explicit(u)
            rho = float(np.mean(np.abs(A @ u - f)))
            residuals.append(rho)
            inner.append(lin.last_iterations)
            if log:
                logger.info("n=%d k=%d rho=%.6e inner=%d", n, k, rho, lin.last_iterations)
            if rho < eta:
                return u, residuals, inner
        raise StageError(n, residuals[-1], k_max)

    def run(self, schedule: StageSchedule | None = None, keep_fields=False) -> SolveResult:
        schedule = schedule or StageSchedule.for_mesh(self.mesh)
        if schedule.h >= 1.0:
            logger.warning("h=%.4g is not below 1: the regularisation does not decrease", schedule.h)
        stages = []
        t0 = time.perf_counter()
        eps = schedule.eps(1)
        u, it = self.stage1(eps)
        logger.info("n=1 k=1 rho=nan inner=%d", it)
        stages.append(StageResult(1, eps, 1, [], [it], time.perf_counter() - t0,
                                  u.copy() if keep_fields else None))
        for n in range(2, schedule.n_stages + 1):
            t0 = time.perf_counter()
            eps = schedule.eps(n)
            u, res, inner = self.stage(n, eps, u, schedule.eta, schedule.k_max)
            stages.append(StageResult(n, eps, len(res), res, inner, time.perf_counter() - t0,
                                      u.copy() if keep_fields else None))
        floor = -1e-9 * self.mesh.h
        if u.min() < floor:
            logger.warning("negative distance values down to %.3e", u.min())
        return SolveResult(u, stages, self.seeds, schedule, self.pinned)


def run_stage1(mesh: PolyMesh, seeds: SeedSet, eps: float, gamma: Gamma | None = None,
               solver: SolverConfig | None = None):
    """
    Zero-gradient first stage with the given seeds.

    ``gamma`` only supplies boundary Dirichlet triangles; with ``None`` the
    seeds are the only data.
    """
    if seeds is None or len(seeds) == 0:
        raise NoDirichletData("no Dirichlet data")
    gamma = gamma if gamma is not None else _NoBoundary()
    u, _ = EikonalSolver(mesh, gamma, solver, seeds=seeds).stage1(eps)
    return u


class _NoBoundary(Gamma):
    def distance(self, x):
        return np.full(np.shape(x)[:-1], np.inf)

    def dirichlet_tris(self, mesh):
        return np.zeros(mesh.n_tris, dtype=bool)


def run_algorithm(mesh: PolyMesh, gamma: Gamma, schedule: StageSchedule | None = None,
                  solver: SolverConfig | None = None, keep_fields=False) -> SolveResult:
    """Full staged solve; see :class:`EikonalSolver`."""
    return EikonalSolver(mesh, gamma, solver).run(schedule, keep_fields)
