"""
Sparse solvers for the nonsymmetric cell systems.

Krylov methods from scipy, preconditioned by a zero-fill incomplete LU
factorisation written here (scipy's ``spilu`` is threshold-based and does not
keep the sparsity pattern).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

METHODS = ("bicgstab", "gmres")
PRECONDITIONERS = ("none", "diagonal", "ilu0")


class SolverError(RuntimeError):
    """Krylov iteration failed to reach the requested tolerance."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SolverConfig:
    method: str = "bicgstab"
    preconditioner: str = "ilu0"
    rtol: float = 1e-12
    max_iter: int | None = None
    restart: int = 50

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if not 0.0 < self.rtol < 1.0:
            raise ValueError("rtol must lie in (0, 1)")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    def iteration_limit(self, n: int) -> int:
        return self.max_iter if self.max_iter is not None else int(10 * np.sqrt(n)) + 200


@numba.njit(cache=True)
def _ilu0_factor(indptr, indices, data, diag):
    n = len(indptr) - 1
    a = data.copy()
    marker = -np.ones(n, dtype=np.int64)
    for i in range(n):
        for jj in range(indptr[i], indptr[i + 1]):
            marker[indices[jj]] = jj
        for kk in range(indptr[i], diag[i]):
            k = indices[kk]
            a[kk] /= a[diag[k]]
            lik = a[kk]
            for jj in range(diag[k] + 1, indptr[k + 1]):
                pos = marker[indices[jj]]
                if pos >= 0:
                    a[pos] -= lik * a[jj]
        for jj in range(indptr[i], indptr[i + 1]):
            marker[indices[jj]] = -1
    return a


@numba.njit(cache=True)
def _ilu0_solve(indptr, indices, lu, diag, b):
    n = len(b)
    x = b.copy()
    for i in range(n):
        s = x[i]
        for kk in range(indptr[i], diag[i]):
            s -= lu[kk] * x[indices[kk]]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for kk in range(diag[i] + 1, indptr[i + 1]):
            s -= lu[kk] * x[indices[kk]]
        x[i] = s / lu[diag[i]]
    return x


class ILU0:
    """Incomplete LU factorisation on the sparsity pattern of ``A``."""

    def __init__(self, A):
        A = sp.csr_matrix(A)
        A.sum_duplicates()
        A.sort_indices()
        n = A.shape[0]
        rows = np.repeat(np.arange(n), np.diff(A.indptr))
        on_diag = np.flatnonzero(rows == A.indices)
        if len(on_diag) != n:
            raise ValueError("ILU(0) needs a stored diagonal entry on every row")
        self.indptr = A.indptr.astype(np.int64)
        self.indices = A.indices.astype(np.int64)
        self.diag = on_diag.astype(np.int64)
        self.lu = _ilu0_factor(self.indptr, self.indices, A.data.astype(float), self.diag)
        if np.any(self.lu[self.diag] == 0):
            raise ZeroDivisionError("zero pivot in ILU(0)")
        self.shape = A.shape

    def solve(self, b):
        return _ilu0_solve(self.indptr, self.indices, self.lu, self.diag, np.asarray(b, dtype=float))

    def as_operator(self):
        return spla.LinearOperator(self.shape, matvec=self.solve, dtype=float)


def make_preconditioner(A, kind: str):
    if kind == "none":
        return None
    if kind == "diagonal":
        d = A.diagonal()
        inv = 1.0 / np.where(d != 0, d, 1.0)
        return spla.LinearOperator(A.shape, matvec=lambda x: inv * x, dtype=float)
    if kind == "ilu0":
        return ILU0(A).as_operator()
    raise ValueError(f"unknown preconditioner {kind!r}")


class LinearSolver:
    """Solver bound to one matrix; the preconditioner is built once and reused."""

    def __init__(self, A, config: SolverConfig | None = None):
        self.A = sp.csr_matrix(A)
        self.config = config or SolverConfig()
        self.M = make_preconditioner(self.A, self.config.preconditioner)
        self.last_iterations = 0

    def solve(self, f, x0=None):
        cfg = self.config
        f = np.asarray(f, dtype=float)
        n = len(f)
        count = [0]

        def cb(_):
            count[0] += 1

        bnorm = np.linalg.norm(f)
        if bnorm == 0.0:
            self.last_iterations = 0
            return np.zeros(n)
        maxiter = cfg.iteration_limit(n)
        if cfg.method == "bicgstab":
            x, info = spla.bicgstab(self.A, f, x0=x0, rtol=cfg.rtol, atol=0.0,
                                    maxiter=maxiter, M=self.M, callback=cb)
        else:
            x, info = spla.gmres(self.A, f, x0=x0, rtol=cfg.rtol, atol=0.0, restart=cfg.restart,
                                 maxiter=maxiter, M=self.M, callback=cb, callback_type="pr_norm")
        self.last_iterations = count[0]
        rel = np.linalg.norm(self.A @ x - f) / bnorm
        # scipy measures the preconditioned residual for some paths; enforce the true one
        if info != 0 or rel > max(cfg.rtol * 10, 1e-14):
            raise SolverError(f"{cfg.method} did not converge in {maxiter} iterations", rel)
        return x


def solve_linear(system, x0=None, config: SolverConfig | None = None):
    """Solve ``system.A x = system.f`` (or ``A, f`` tuple) with a preconditioned Krylov method."""
    A, f = (system.A, system.f) if hasattr(system, "A") else system
    return LinearSolver(A, config).solve(f, x0)


def outer_residual(A, f, u) -> float:
    """Mean absolute row residual ``|A u - f|``."""
    return float(np.mean(np.abs(A @ u - f)))
