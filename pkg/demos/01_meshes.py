"""
Polyhedral meshes
=================

Build a hexahedral mesh of a slotted box, jiggle its vertices, and look at
the geometric quantities every later step relies on.
"""

import tempfile
from pathlib import Path

import numpy as np

from eikonal_fv.generators import Box, BoxMinusBox, box_hex_mesh, perturb_mesh
from eikonal_fv.meshio import read_polymesh, write_polymesh, write_vtk

# a unit box with a slot cut from one side
domain = BoxMinusBox(Box((0, 0, 0), (1, 1, 0.25)), Box((0.25, 0.4, 0), (1, 0.6, 0.25)))
mesh = box_hex_mesh(domain, (16, 20, 4))
print(mesh)
print("cells:", mesh.n_cells, " faces:", mesh.n_faces, " boundary faces:", len(mesh.boundary_faces))

# %%
# Faces are split into triangles around a face center.  Each triangle
# carries an area-weighted normal oriented out of its owner cell.
g = mesh.internal_faces[0]
t = slice(mesh.tri_ptr[g], mesh.tri_ptr[g + 1])
print("face", g, "vertices", mesh.face_vertices(g), "triangle areas", mesh.tri_areas[t])

# %%
# Random vertex displacements keep cells valid and the outer surface intact,
# so the total volume is unchanged.
wobbly = perturb_mesh(mesh, 0.25, seed=1)
print("volume before %.15f after %.15f" % (mesh.cell_volumes.sum(), wobbly.cell_volumes.sum()))
print("worst closure defect: %.2e" % wobbly.closure_defect.max())
print("characteristic length h = %.4f" % wobbly.h)

# %%
# Round trip through the poly-mesh format and write a VTK file for viewing.
out = Path(tempfile.mkdtemp(prefix="eikonal_fv_"))
back = read_polymesh(write_polymesh(wobbly, out / "slot.poly", binary=True))
assert np.array_equal(back.vertices, wobbly.vertices)
write_vtk(wobbly, out / "slot.vtk", {"volume": wobbly.cell_volumes})
print("wrote", sorted(p.name for p in out.iterdir()), "to", out)
