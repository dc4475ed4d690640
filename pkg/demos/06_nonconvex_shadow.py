"""
Going around corners
====================

In a C-shaped domain the distance from a patch on the upper arm to points
on the lower arm must wrap around the slot.  A straight-line distance
would be far too small there.  A fine-grid Dijkstra oracle gives the
reference.
"""

import numpy as np

from eikonal_fv import run_algorithm
from eikonal_fv.oracle import GeodesicOracle
from eikonal_fv.study import GAMMA1, example, make_mesh

problem = example("EX3")
shape = (24, 24, 8)
mesh = make_mesh(problem.domain, shape)
res = run_algorithm(mesh, problem.gamma)
oracle = GeodesicOracle(problem.domain, problem.gamma, tuple(4 * s for s in shape))

# %%
# Probe cells on the far side of the slot.
probes = np.array([[10, -10, 0], [0, -12, 0], [-10, -10, 0], [12, -7, 0]]) * GAMMA1
cells = [int(np.argmin(np.linalg.norm(mesh.cell_centers - p, axis=1))) for p in probes]
x = mesh.cell_centers[cells]
print(f"{'x/gamma':>22} {'solver':>8} {'oracle':>8} {'straight':>8}")
for xc, u, ref, line in zip(x / GAMMA1, res.u[cells], oracle(x), problem.gamma.distance(x)):
    print(f"{np.array2string(xc, precision=1):>22} {u:8.3f} {ref:8.3f} {line:8.3f}")

# %%
# Over the whole lower arm, compare with the oracle's own accuracy.
shadow = (mesh.cell_centers[:, 1] < -5 * GAMMA1) & ~res.pinned
ref = oracle(mesh.cell_centers[shadow])
err = np.abs(res.u[shadow] - ref)
print("lower arm: max |u - oracle| = %.3f, 2h = %.3f, mean oracle bias bound = %.3f"
      % (err.max(), 2 * mesh.h, oracle.bias_bound(ref).mean()))
