"""
Gradients with a unit-norm constraint
=====================================

Cell gradients come from weighted least squares over face neighbours.
Because a distance function has unit slope, the fit is constrained to the
unit ball.
"""

import numpy as np

from eikonal_fv.generators import Box, box_hex_mesh, perturb_mesh
from eikonal_fv.gradient import FaceGradient, LeastSquaresGradient

mesh = perturb_mesh(box_hex_mesh(Box((0, 0, 0), (1, 1, 1)), 8), 0.2, seed=3)
grad = LeastSquaresGradient(mesh, mesh.boundary_tris)

# %%
# Affine data is reproduced exactly, even on a distorted mesh, as long as
# boundary values are supplied.
a = np.array([0.2, -0.4, 0.5])
u = mesh.cell_centers @ a
g = grad(u, mesh.tri_centers[mesh.boundary_tris] @ a)
print("max error for affine data: %.2e" % np.abs(g - a).max())

# %%
# For steeper data the fit is solved with the norm bound active.  This is
# not the same as fitting freely and rescaling afterwards.
steep = grad(3 * u, 3 * mesh.tri_centers[mesh.boundary_tris] @ a)
free = grad(3 * u, 3 * mesh.tri_centers[mesh.boundary_tris] @ a, constrained=False)
print("unconstrained norm %.3f, constrained norm %.3f" % (np.linalg.norm(free[0]), np.linalg.norm(steep[0])))
rescaled = free / np.linalg.norm(free, axis=1)[:, None]
angle = np.degrees(np.arccos(np.clip(np.sum(steep * rescaled, axis=1), -1, 1)))
print("angle to the rescaled free fit: median %.2f deg, max %.2f deg" % (np.median(angle), angle.max()))

# %%
# Face gradients blend the two neighbouring cell gradients by inverse
# distance and are clipped to the unit ball as well.
beta = FaceGradient(mesh)(steep)
print("largest face-gradient norm: %.15f" % np.linalg.norm(beta, axis=1).max())
