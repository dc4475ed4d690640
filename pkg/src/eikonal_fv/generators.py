"""
Analytic domains and desk-scale mesh generators.

Two domain shapes are supported: an axis-aligned box and a box with an
axis-aligned box removed (the cut may reach past the outer box, which gives
slots and L-shapes).  Hex meshes are generated on a uniform grid whose lines
must pass through the cut planes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import MeshError, PolyMesh

ALIGN_TOL = 1e-9

# boundary tags written by the generator
XMIN, XMAX, YMIN, YMAX, ZMIN, ZMAX, CUT = range(7)


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3 or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("box needs lo < hi in all three axes")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, x, tol=0.0):
        """Closure membership for points ``(..., 3)``."""
        x = np.asarray(x, dtype=float)
        return np.all((x >= np.subtract(self.lo, tol)) & (x <= np.add(self.hi, tol)), axis=-1)

    def boundary_distance(self, x):
        """Distance from interior points to the box surface."""
        x = np.asarray(x, dtype=float)
        return np.minimum(x - self.lo, np.subtract(self.hi, x)).min(axis=-1)

    def segment_inside(self, a, b):
        return self.contains(a) & self.contains(b)

    def cell_mask(self, centers):
        return np.ones(centers.shape[:-1], dtype=bool)

    @property
    def bounds(self):
        return self


@dataclass(frozen=True)
class BoxMinusBox:
    """``outer`` with the open box ``cut`` removed."""

    outer: Box
    cut: Box

    @property
    def lo(self):
        return self.outer.lo

    @property
    def hi(self):
        return self.outer.hi

    @property
    def bounds(self):
        return self.outer

    @property
    def clipped_cut(self) -> Box:
        lo = np.maximum(self.cut.lo, self.outer.lo)
        hi = np.minimum(self.cut.hi, self.outer.hi)
        return Box(tuple(lo), tuple(hi))

    @property
    def volume(self) -> float:
        return self.outer.volume - self.clipped_cut.volume

    def _cut_extent(self):
        # a cut reaching the outer surface also removes that part of the surface
        lo = np.where(np.less_equal(self.cut.lo, self.outer.lo), -np.inf, self.cut.lo)
        hi = np.where(np.greater_equal(self.cut.hi, self.outer.hi), np.inf, self.cut.hi)
        return lo, hi

    def _in_open_cut(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        lo, hi = self._cut_extent()
        return np.all((x > lo + tol) & (x < hi - tol), axis=-1)

    def contains(self, x, tol=0.0):
        return self.outer.contains(x, tol) & ~self._in_open_cut(x, tol)

    def boundary_distance(self, x):
        x = np.asarray(x, dtype=float)
        d_out = self.outer.boundary_distance(x)
        lo, hi = self._cut_extent()
        gap = np.maximum(np.maximum(lo - x, x - hi), 0.0)
        return np.minimum(d_out, np.linalg.norm(gap, axis=-1))

    def segment_inside(self, a, b):
        """True where the closed segment ``a-b`` avoids the open cut box."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        a, b = np.broadcast_arrays(a, b)
        d = b - a
        lo, hi = self._cut_extent()
        t0 = np.zeros(len(a))
        t1 = np.ones(len(a))
        hit = np.ones(len(a), dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            for k in range(3):
                par = d[:, k] == 0
                # a parallel segment misses the open slab unless strictly inside it
                outside = par & ((a[:, k] <= lo[k]) | (a[:, k] >= hi[k]))
                hit &= ~outside
                ta = (lo[k] - a[:, k]) / d[:, k]
                tb = (hi[k] - a[:, k]) / d[:, k]
                tmin = np.where(par, -np.inf, np.minimum(ta, tb))
                tmax = np.where(par, np.inf, np.maximum(ta, tb))
                t0 = np.maximum(t0, tmin)
                t1 = np.minimum(t1, tmax)
        crosses = hit & (t0 < t1)
        ok = self.outer.contains(a) & self.outer.contains(b) & ~crosses
        return ok

    def cell_mask(self, centers):
        return ~self._in_open_cut(centers)


def _grid_lines(lo, hi, n):
    return np.linspace(lo, hi, n + 1)


def _check_aligned(domain, shape):
    if not isinstance(domain, BoxMinusBox):
        return
    outer = domain.outer
    cut = domain.clipped_cut
    for k in range(3):
        step = (outer.hi[k] - outer.lo[k]) / shape[k]
        for v in (cut.lo[k], cut.hi[k]):
            m = (v - outer.lo[k]) / step
            if abs(m - round(m)) > ALIGN_TOL * max(1.0, abs(m)):
                raise MeshError("cut region is not aligned to the grid")


def box_hex_mesh(domain, shape) -> PolyMesh:
    """
    Uniform hexahedral mesh of a :class:`Box` or :class:`BoxMinusBox`.

    Parameters
    ----------
    domain : Box or BoxMinusBox
    shape : int or 3-tuple of int
        Cells per axis over the outer box.
    """
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape),) * 3
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3 or min(shape) < 2:
        raise MeshError("need at least 2 cells per axis")
    _check_aligned(domain, shape)
    outer = domain.bounds
    nx, ny, nz = shape
    xs = [_grid_lines(outer.lo[k], outer.hi[k], shape[k]) for k in range(3)]
    # snap the outer planes exactly
    for k in range(3):
        xs[k][0], xs[k][-1] = outer.lo[k], outer.hi[k]

    cc = np.stack(np.meshgrid(*[(x[1:] + x[:-1]) / 2 for x in xs], indexing="ij"), axis=-1)
    active = domain.cell_mask(cc)
    cell_id = -np.ones(shape, dtype=np.int64)
    cell_id[active] = np.arange(int(active.sum()))

    node_id = np.arange((nx + 1) * (ny + 1) * (nz + 1)).reshape(nx + 1, ny + 1, nz + 1)
    padded = -np.ones((nx + 2, ny + 2, nz + 2), dtype=np.int64)
    padded[1:-1, 1:-1, 1:-1] = cell_id

    loops, owners, neighbors, patches = [], [], [], []
    # axis k faces at grid plane index i (between cells i-1 and i)
    for k in range(3):
        a1, a2 = (k + 1) % 3, (k + 2) % 3
        lo_cells = np.moveaxis(np.moveaxis(padded, k, 0)[:-1], 0, k)
        hi_cells = np.moveaxis(np.moveaxis(padded, k, 0)[1:], 0, k)
        # crop the padding in the transverse axes
        sl = [slice(1, -1)] * 3
        sl[k] = slice(None)
        lo_cells = lo_cells[tuple(sl)]
        hi_cells = hi_cells[tuple(sl)]
        ijk = np.argwhere((lo_cells >= 0) | (hi_cells >= 0))
        L = lo_cells[tuple(ijk.T)]
        H = hi_cells[tuple(ijk.T)]

        def nid(off1, off2):
            idx = ijk.copy()
            idx[:, a1] += off1
            idx[:, a2] += off2
            return node_id[tuple(idx.T)]

        # loop ordered (a1, a2) counter-clockwise -> normal along +k
        loop = np.stack([nid(0, 0), nid(1, 0), nid(1, 1), nid(0, 1)], axis=1)
        internal = (L >= 0) & (H >= 0)
        only_hi = (L < 0) & (H >= 0)
        own = np.where(L >= 0, L, H)
        nb = np.where(internal, H, -1)
        loop[only_hi] = loop[only_hi][:, ::-1]
        plane = ijk[:, k]
        tag = np.full(len(ijk), -1)
        bnd = ~internal
        tag[bnd & (plane == 0)] = 2 * k
        tag[bnd & (plane == shape[k])] = 2 * k + 1
        tag[bnd & (plane > 0) & (plane < shape[k])] = CUT
        loops.append(loop)
        owners.append(own)
        neighbors.append(nb)
        patches.append(tag)

    loops = np.concatenate(loops)
    owners = np.concatenate(owners)
    neighbors = np.concatenate(neighbors)
    patches = np.concatenate(patches)
    # owner-major face order, internal faces first within a cell
    order = np.lexsort((neighbors < 0, owners))
    loops, owners, neighbors, patches = loops[order], owners[order], neighbors[order], patches[order]

    used, inv = np.unique(loops, return_inverse=True)
    grid = np.stack(np.meshgrid(*xs, indexing="ij"), axis=-1).reshape(-1, 3)
    verts = grid[used]
    faces = inv.reshape(loops.shape)
    ptr = np.arange(0, faces.size + 1, 4, dtype=np.int64)
    return PolyMesh(verts, (ptr, faces.ravel().astype(np.int64)), owners, neighbors, patches)


def perturb_mesh(mesh: PolyMesh, amplitude: float, seed: int, frozen=None) -> PolyMesh:
    """
    Randomly displace vertices by up to ``amplitude`` times the local edge length.

    Boundary vertices only slide within their boundary planes (along edges at
    creases, not at all at corners); vertices flagged in ``frozen`` stay put.
    """
    if not 0.0 <= amplitude <= 0.3:
        raise ValueError("amplitude must lie in [0, 0.3]")
    if amplitude == 0.0:
        return mesh
    X = mesh.vertices
    nv = mesh.n_vertices
    ptr, idx = mesh.face_ptr, mesh.face_idx
    succ = np.arange(len(idx)) + 1
    succ[ptr[1:] - 1] = ptr[:-1]
    elen = np.linalg.norm(X[idx[succ]] - X[idx], axis=1)
    spacing = np.full(nv, np.inf)
    np.minimum.at(spacing, idx, elen)
    np.minimum.at(spacing, idx[succ], elen)

    # projector onto the tangent space left by the boundary faces touching a vertex
    N = np.zeros((nv, 3, 3))
    bf = mesh.boundary_faces
    nhat = mesh.face_vectors[bf] / mesh.face_areas[bf, None]
    sizes = np.diff(ptr)[bf]
    bverts = np.concatenate([mesh.face_vertices(g) for g in bf]) if len(bf) else np.zeros(0, int)
    np.add.at(N, bverts, np.repeat(np.einsum("ni,nj->nij", nhat, nhat), sizes, axis=0))
    w, V = np.linalg.eigh(N)
    free = (w < 1e-8).astype(float)
    proj = np.einsum("nik,nk,njk->nij", V, free, V)

    rng = np.random.default_rng(seed)
    disp = amplitude * spacing[:, None] * rng.uniform(-1.0, 1.0, size=(nv, 3))
    disp = np.einsum("nij,nj->ni", proj, disp)
    if frozen is not None:
        disp[np.asarray(frozen, dtype=bool)] = 0.0
    return mesh.with_vertices(X + disp)
