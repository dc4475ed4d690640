"""
Linear solvers
==============

Every deferred-correction step solves a sparse nonsymmetric system.  Compare
Krylov methods and preconditioners on one of them.
"""

import time

import numpy as np

from eikonal_fv import EikonalSolver, SolverConfig
from eikonal_fv.linsolve import LinearSolver
from eikonal_fv.study import example, make_mesh

problem = example("EX1")
mesh = make_mesh(problem.domain, 25, amplitude=0.2, seed=4, gamma=problem.gamma)
solver = EikonalSolver(mesh, problem.gamma)

# %%
# Build the stage-2 system from the stage-1 field.
eps1, eps2 = mesh.h ** 0.5, mesh.h
u1, _ = solver.stage1(eps1)
mu = solver.fluxes(u1)
A = solver.disc.matrix(eps2, mu)
g = solver.gradient(u1)
f = solver.disc.rhs(eps2, mu, g, np.zeros_like(g))
print("unknowns:", A.shape[0], " nonzeros:", A.nnz)

for method in ("bicgstab", "gmres"):
    for prec in ("none", "diagonal", "ilu0"):
        lin = LinearSolver(A, SolverConfig(method=method, preconditioner=prec))
        t0 = time.perf_counter()
        x = lin.solve(f)
        dt = time.perf_counter() - t0
        rel = np.linalg.norm(A @ x - f) / np.linalg.norm(f)
        print(f"{method:9s} {prec:9s} iterations={lin.last_iterations:4d} rel.res={rel:.1e} {dt * 1e3:7.1f} ms")
