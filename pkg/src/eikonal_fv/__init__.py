"""
Distance fields on polyhedral meshes from a regularised eikonal equation.

The distance to a source set is the limit of ``-eps*lap(u) + |grad u| = 1``
as ``eps`` vanishes.  It is solved with a cell-centered finite volume scheme
over a decreasing sequence of ``eps``, with walls treated so that no distance
information enters the domain through them.
"""

from .assembly import Discretization, SparseSystem, compute_fluxes, skewness_points, split_sets
from .driver import EikonalSolver, SolveResult, StageError, StageSchedule, run_algorithm, run_stage1
from .gamma import (Circle, Disk, PatchUnion, PlanePatch, SeedSet, Sphere, Square, SquarePair, Union,
                    WholeBoundary, build_seed_set, classify_cells, dilate, exact_distance)
from .generators import Box, BoxMinusBox, box_hex_mesh, perturb_mesh
from .gradient import cell_gradient_wls, face_gradient_beta, inflow_gradient
from .linsolve import SolverConfig, outer_residual, solve_linear
from .mesh import MeshError, PolyMesh, characteristic_length, face_vector, tessellate_face
from .meshio import export_field, read_polymesh, write_polymesh, write_vtk
from .oracle import GeodesicOracle, geodesic_distance_oracle
from .study import compute_eoc, example, run_convergence_study

__version__ = "0.1.0"

__all__ = [
    "Box", "BoxMinusBox", "Circle", "Discretization", "Disk", "EikonalSolver", "GeodesicOracle",
    "MeshError", "PatchUnion", "PlanePatch", "PolyMesh", "SeedSet", "SolveResult", "SolverConfig",
    "SparseSystem", "Sphere", "Square", "SquarePair", "StageError", "StageSchedule", "Union",
    "WholeBoundary", "box_hex_mesh", "build_seed_set", "cell_gradient_wls", "characteristic_length",
    "classify_cells", "compute_eoc", "compute_fluxes", "dilate", "exact_distance", "example",
    "export_field", "face_gradient_beta", "face_vector", "geodesic_distance_oracle", "inflow_gradient",
    "outer_residual", "perturb_mesh", "read_polymesh", "run_algorithm", "run_convergence_study",
    "run_stage1", "skewness_points", "solve_linear", "split_sets", "tessellate_face", "write_polymesh",
    "write_vtk",
]
