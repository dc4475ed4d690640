"""
Source sets, cell classification and seeding.

Every source-set variant knows its exact Euclidean distance and whether it
meets a closed cell.  Sources either lie on the domain boundary (wall patches,
the whole boundary) or strictly inside the domain (spheres, circles, disks,
squares); a union must not mix the two.

Seeding follows the cell sets: cells meeting an interior source are dilated
twice by face neighbours, cells meeting a boundary source once, and every
seeded cell is pinned to the exact distance of its center.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import MultiPoint, Point, Polygon, box as shapely_box

from .mesh import PolyMesh


class GammaError(ValueError):
    """Unsupported or inconsistent source set."""


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def plane_basis(normal):
    """Orthonormal in-plane axes ``(e1, e2)``; coordinate normals give coordinate axes."""
    n = _unit(normal)
    k = int(np.argmax(np.abs(n)))
    if np.isclose(abs(n[k]), 1.0):
        e1 = np.zeros(3)
        e1[(k + 1) % 3] = 1.0
        e2 = np.zeros(3)
        e2[(k + 2) % 3] = 1.0
        if n[k] < 0:
            e1, e2 = e2, e1
        return e1, e2
    a = np.eye(3)[int(np.argmin(np.abs(n)))]
    e1 = _unit(a - a.dot(n) * n)
    return e1, np.cross(n, e1)


def closest_point_triangles(p, a, b, c):
    """Closest points on triangles ``(a, b, c)`` to ``p`` (all ``(n, 3)``, broadcastable)."""
    p, a, b, c = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p, a, b, c)))
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        out = a + v[:, None] * ab + w[:, None] * ac
        # edge regions
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    out[m] = a[m] + t_ab[m, None] * ab[m]
    m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    out[m] = a[m] + t_ac[m, None] * ac[m]
    m = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    out[m] = b[m] + t_bc[m, None] * (c[m] - b[m])
    # vertex regions
    m = (d1 <= 0) & (d2 <= 0)
    out[m] = a[m]
    m = (d3 >= 0) & (d4 <= d3)
    out[m] = b[m]
    m = (d6 >= 0) & (d5 <= d6)
    out[m] = c[m]
    return out


def _inside_closed_surface(p, tris, tol):
    """Point-in-polyhedron by the sign of the generalised winding number."""
    a, b, c = (tris[:, k] - p for k in range(3))
    la, lb, lc = (np.linalg.norm(x, axis=1) for x in (a, b, c))
    num = np.einsum("ij,ij->i", a, np.cross(b, c))
    den = (la * lb * lc + np.einsum("ij,ij->i", a, b) * lc
           + np.einsum("ij,ij->i", b, c) * la + np.einsum("ij,ij->i", c, a) * lb)
    wind = np.sum(np.arctan2(num, den)) / (2 * np.pi)
    return wind > 0.5


def _section(tris, origin, normal, e1, e2, tol):
    """2D convex section of a closed triangulated cell by a plane, or None."""
    pts = tris.reshape(-1, 3)
    s = (pts - origin) @ normal
    if s.min() > tol or s.max() < -tol:
        return None
    on = pts[np.abs(s) <= tol]
    ea = np.concatenate([tris[:, 0], tris[:, 1], tris[:, 2]])
    eb = np.concatenate([tris[:, 1], tris[:, 2], tris[:, 0]])
    sa = (ea - origin) @ normal
    sb = (eb - origin) @ normal
    cross = ((sa > tol) & (sb < -tol)) | ((sa < -tol) & (sb > tol))
    t = sa[cross] / (sa[cross] - sb[cross])
    xs = ea[cross] + t[:, None] * (eb[cross] - ea[cross])
    P = np.concatenate([on, xs])
    if len(P) == 0:
        return None
    uv = np.stack([(P - origin) @ e1, (P - origin) @ e2], axis=1)
    return MultiPoint(uv).convex_hull


class Gamma:
    """Base class of the source-set variants."""

    on_boundary = False
    name = "gamma"

    def distance(self, x):
        raise NotImplementedError

    def intersects_cell(self, tris, tol) -> bool:
        """Whether the closed region bounded by triangles ``tris`` meets the set."""
        raise NotImplementedError

    def parts(self):
        return [self]

    def cell_mask(self, mesh: PolyMesh) -> np.ndarray:
        tol = 1e-9 * mesh.h
        d = self.distance(mesh.cell_centers)
        cand = np.flatnonzero(d <= mesh.cell_radius + tol)
        mask = np.zeros(mesh.n_cells, dtype=bool)
        for p in cand:
            mask[p] = self.intersects_cell(mesh.cell_triangles(p), tol)
        return mask

    def dirichlet_tris(self, mesh: PolyMesh) -> np.ndarray:
        """Boundary-triangle mask of triangles lying on the set."""
        mask = np.zeros(mesh.n_tris, dtype=bool)
        if not self.on_boundary:
            return mask
        b = mesh.boundary_tris
        mask[b] = self.distance(mesh.tri_centers[b]) <= 1e-9 * mesh.h
        return mask


@dataclass(frozen=True)
class Sphere(Gamma):
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0
    name = "sphere"

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.abs(np.linalg.norm(x - np.asarray(self.center), axis=-1) - self.radius)

    def intersects_cell(self, tris, tol):
        c = np.asarray(self.center, dtype=float)
        pts = tris.reshape(-1, 3)
        dmax = np.linalg.norm(pts - c, axis=1).max()
        if dmax < self.radius - tol:
            return False
        if _inside_closed_surface(c, tris, tol):
            return True
        cp = closest_point_triangles(c[None], tris[:, 0], tris[:, 1], tris[:, 2])
        dmin = np.linalg.norm(cp - c, axis=1).min()
        return bool(dmin <= self.radius + tol)


class _Planar(Gamma):
    """A compact set lying in a plane, described by a 2D shape in plane coordinates."""

    def _frame(self):
        n = _unit(self.normal)
        e1, e2 = plane_basis(n)
        return np.asarray(self.center, dtype=float), n, e1, e2

    def _split(self, x):
        o, n, e1, e2 = self._frame()
        r = np.asarray(x, dtype=float) - o
        return r @ e1, r @ e2, r @ n

    def _in_plane_distance(self, u, v):
        raise NotImplementedError

    def distance(self, x):
        u, v, s = self._split(x)
        return np.hypot(self._in_plane_distance(u, v), s)

    def _shape(self):
        raise NotImplementedError

    def intersects_cell(self, tris, tol):
        o, n, e1, e2 = self._frame()
        sec = _section(tris, o, n, e1, e2, tol)
        if sec is None:
            return False
        return bool(self._shape_meets(sec, tol))

    def _shape_meets(self, sec, tol):
        return sec.distance(self._shape()) <= tol


@dataclass(frozen=True)
class Circle(_Planar):
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0
    normal: tuple = (0.0, 0.0, 1.0)
    name = "circle"

    def _in_plane_distance(self, u, v):
        return np.abs(np.hypot(u, v) - self.radius)

    def _shape_meets(self, sec, tol):
        origin = Point(0.0, 0.0)
        near = sec.distance(origin)
        far = shapely.hausdorff_distance(origin, sec) if not sec.is_empty else 0.0
        return near <= self.radius + tol and far >= self.radius - tol


@dataclass(frozen=True)
class Disk(_Planar):
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0
    normal: tuple = (0.0, 0.0, 1.0)
    name = "disk"

    def _in_plane_distance(self, u, v):
        return np.maximum(np.hypot(u, v) - self.radius, 0.0)

    def _shape_meets(self, sec, tol):
        return sec.distance(Point(0.0, 0.0)) <= self.radius + tol


@dataclass(frozen=True)
class Rectangle(_Planar):
    """Axis-aligned rectangle ``[u0, u1] x [v0, v1]`` in plane coordinates around ``center``."""

    center: tuple = (0.0, 0.0, 0.0)
    u_range: tuple = (-0.5, 0.5)
    v_range: tuple = (-0.5, 0.5)
    normal: tuple = (0.0, 0.0, 1.0)
    name = "rectangle"

    def _in_plane_distance(self, u, v):
        du = np.maximum(np.maximum(self.u_range[0] - u, u - self.u_range[1]), 0.0)
        dv = np.maximum(np.maximum(self.v_range[0] - v, v - self.v_range[1]), 0.0)
        return np.hypot(du, dv)

    def _shape(self):
        return shapely_box(self.u_range[0], self.v_range[0], self.u_range[1], self.v_range[1])


def Square(center=(0.0, 0.0, 0.0), side=1.0, normal=(0.0, 0.0, 1.0)) -> Rectangle:
    h = 0.5 * float(side)
    return Rectangle(tuple(center), (-h, h), (-h, h), tuple(normal))


@dataclass(frozen=True)
class PlanePatch(Rectangle):
    """Rectangle lying on the domain boundary: ``x[axis] = offset``, the other two axes bounded."""

    on_boundary = True
    name = "patch"

    @classmethod
    def on_plane(cls, axis: int, offset: float, lo, hi) -> "PlanePatch":
        """Patch ``{x_axis = offset} x [lo, hi]`` with ``lo``/``hi`` over the other two axes (cyclic order)."""
        n = np.zeros(3)
        n[axis] = 1.0
        c = np.zeros(3)
        c[axis] = offset
        return cls(tuple(c), (float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1])), tuple(n))

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if np.count_nonzero(n) != 1:
            raise GammaError("a boundary patch must lie in a coordinate plane")


@dataclass(frozen=True)
class WholeBoundary(Gamma):
    """The full boundary of an analytic domain."""

    domain: object = None
    on_boundary = True
    name = "boundary"

    def distance(self, x):
        return np.maximum(self.domain.boundary_distance(x), 0.0)

    def cell_mask(self, mesh):
        mask = np.zeros(mesh.n_cells, dtype=bool)
        bv = mesh.boundary_vertex_mask
        hit = bv[mesh.face_idx]
        faces = np.flatnonzero(np.add.reduceat(hit.astype(int), mesh.face_ptr[:-1]) > 0)
        mask[mesh.owner[faces]] = True
        nb = mesh.neighbor[faces]
        mask[nb[nb >= 0]] = True
        return mask

    def dirichlet_tris(self, mesh):
        mask = np.zeros(mesh.n_tris, dtype=bool)
        mask[mesh.boundary_tris] = True
        return mask


@dataclass(frozen=True)
class Union(Gamma):
    members: tuple = field(default_factory=tuple)
    name = "union"

    def __post_init__(self):
        if not self.members:
            raise GammaError("empty source union")
        flags = {m.on_boundary for m in self.members}
        if len(flags) > 1:
            raise GammaError("mixed Γ unsupported: union mixes boundary and interior parts")

    @property
    def on_boundary(self):
        return self.members[0].on_boundary

    def parts(self):
        return list(self.members)

    def distance(self, x):
        return np.min([m.distance(x) for m in self.members], axis=0)

    def cell_mask(self, mesh):
        return np.any([m.cell_mask(mesh) for m in self.members], axis=0)

    def dirichlet_tris(self, mesh):
        return np.any([m.dirichlet_tris(mesh) for m in self.members], axis=0)


def PatchUnion(patches) -> Union:
    return Union(tuple(patches))


def SquarePair(first: Rectangle, second: Rectangle) -> Union:
    return Union((first, second))


# ----------------------------------------------------------------------
def classify_cells(mesh: PolyMesh, gamma: Gamma):
    """
    Cells whose closure meets the source set.

    Returns
    -------
    (boundary_cells, interior_cells) : pair of int arrays
        Exactly one of them is non-empty.
    """
    mask = gamma.cell_mask(mesh)
    cells = np.flatnonzero(mask)
    if len(cells) == 0:
        raise GammaError("source set does not meet the mesh")
    empty = np.zeros(0, dtype=np.int64)
    if gamma.on_boundary:
        if not gamma.dirichlet_tris(mesh).any():
            raise GammaError("boundary source set does not cover any boundary triangle")
        return cells, empty
    _check_interior(mesh, gamma, cells)
    return empty, cells


def _check_interior(mesh, gamma, cells):
    """Reject interior sources that reach the domain boundary."""
    tol = 1e-9 * mesh.h
    ptr, tris, _ = mesh.cell_tri_idx
    for p in cells:
        t = tris[ptr[p]:ptr[p + 1]]
        t = t[mesh.tri_neighbor[t] < 0]
        for k in t:
            tri = mesh.tri_pts[k]
            # a flat triangle is a degenerate closed cell for the intersection tests
            if gamma.distance(tri.mean(axis=0)[None])[0] <= mesh.cell_radius[p] and \
                    _meets_triangle(gamma, tri, tol):
                raise GammaError("mixed Γ unsupported: interior source touches the boundary")


def _meets_triangle(gamma, tri, tol):
    flat = np.stack([tri, tri[::-1]])
    try:
        return any(part.intersects_cell(flat, tol) for part in gamma.parts())
    except Exception:  # degenerate sections of a flat cell
        return False


def dilate(mesh: PolyMesh, cells) -> np.ndarray:
    """Add all face neighbours to a cell index set."""
    cells = np.asarray(cells, dtype=np.int64)
    mask = np.zeros(mesh.n_cells, dtype=bool)
    if len(cells) == 0:
        return np.zeros(0, dtype=np.int64)
    mask[cells] = True
    g = mesh.internal_faces
    p, q = mesh.owner[g], mesh.neighbor[g]
    grow = mask.copy()
    grow[q[mask[p]]] = True
    grow[p[mask[q]]] = True
    return np.flatnonzero(grow)


@dataclass(frozen=True)
class SeedSet:
    """Pinned cells with exact distance values."""

    cells: np.ndarray
    values: np.ndarray
    from_boundary: np.ndarray  # True where the entry came from a boundary source

    def mask(self, n_cells):
        m = np.zeros(n_cells, dtype=bool)
        m[self.cells] = True
        return m

    def full_values(self, n_cells):
        v = np.zeros(n_cells)
        v[self.cells] = self.values
        return v

    def __len__(self):
        return len(self.cells)

    def as_dict(self):
        return dict(zip(self.cells.tolist(), self.values.tolist()))


def build_seed_set(mesh: PolyMesh, gamma: Gamma) -> SeedSet:
    on_bnd, inner = classify_cells(mesh, gamma)
    a = dilate(mesh, dilate(mesh, inner))
    b = dilate(mesh, on_bnd)
    cells = np.union1d(a, b)
    values = gamma.distance(mesh.cell_centers[cells])
    return SeedSet(cells, values, np.isin(cells, b))


def exact_distance(gamma: Gamma, x):
    return gamma.distance(x)
