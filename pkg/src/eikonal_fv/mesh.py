"""
Polyhedral mesh data model and geometric precomputation.

A mesh is given by a vertex table, a face table (ordered vertex loops with an
owner cell and an optional neighbour cell) and is otherwise derived: every
face is tessellated into triangles that share the face center, and all cell
quantities (volume, centroid, adjacency) are computed from those triangles.

Orientation convention: a face loop is ordered so that its fan normal points
out of the owner cell.  Internal triangles are stored once, with the owner's
outward normal; the neighbour's normal is the negation.
"""

from __future__ import annotations

from functools import cached_property
from typing import Sequence

import numpy as np

DEGENERATE_AREA = 1e-14
WATERTIGHT_TOL = 1e-10


class MeshError(ValueError):
    """Invalid mesh topology or geometry."""


def _cross(a, b):
    return np.cross(a, b)


def tessellate_face(points):
    """
    Split one polygonal face into triangles sharing the face center.

    Parameters
    ----------
    points : (r, 3) array
        Ordered vertex loop of the face.

    Returns
    -------
    tris : (t, 3, 3) array
        Triangles ``(x_i, x_{i+1}, x_g)``, or the face itself when ``r == 3``.
    center : (3,) array
        Area-weighted face center ``x_g``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 3:
        raise MeshError("a face needs at least 3 vertices in 3D")
    nxt = np.roll(pts, -1, axis=0)
    if np.any(np.all(pts == nxt, axis=1)):
        raise MeshError("consecutive face vertices coincide")
    scale = np.max(np.ptp(pts, axis=0))
    if pts.shape[0] == 3:
        area = 0.5 * np.linalg.norm(_cross(pts[1] - pts[0], pts[2] - pts[0]))
        if area <= DEGENERATE_AREA * scale**2:
            raise MeshError("degenerate face")
        return pts[None].copy(), pts.mean(axis=0)
    x0 = pts.mean(axis=0)
    areas = 0.5 * np.linalg.norm(_cross(pts - x0, nxt - x0), axis=1)
    total = areas.sum()
    if total <= DEGENERATE_AREA * scale**2:
        raise MeshError("degenerate face")
    centroids = (pts + nxt + x0) / 3.0
    xg = (areas[:, None] * centroids).sum(axis=0) / total
    tris = np.stack([pts, nxt, np.broadcast_to(xg, pts.shape)], axis=1)
    return tris, xg


def face_vector(points):
    """Fan-sum vector ``1/2 sum d_{1i} x d_{1,i+1}``; its norm is the area of a planar face."""
    pts = np.asarray(points, dtype=float)
    d = pts[1:] - pts[0]
    return 0.5 * _cross(d[:-1], d[1:]).sum(axis=0)


def characteristic_length(mesh: "PolyMesh") -> float:
    """Mean cube root of the axis-aligned bounding-box volume of each cell."""
    return mesh.h


class PolyMesh:
    """
    Immutable polyhedral mesh.

    Parameters
    ----------
    vertices : (nv, 3) array
    faces : sequence of int sequences, or (ptr, idx) arrays
        Vertex loops, oriented outward from the owner cell.
    owner : (nf,) int array
    neighbor : (nf,) int array
        Neighbour cell, or -1 for a boundary face.
    patch : (nf,) int array, optional
        Boundary tag of each face (ignored on internal faces).
    """

    def __init__(self, vertices, faces: Sequence[Sequence[int]], owner, neighbor, patch=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must be an (n, 3) array")
        if isinstance(faces, tuple) and len(faces) == 2 and isinstance(faces[0], np.ndarray):
            self.face_ptr = np.asarray(faces[0], dtype=np.int64)
            self.face_idx = np.asarray(faces[1], dtype=np.int64)
            sizes = np.diff(self.face_ptr)
        else:
            sizes = np.fromiter((len(f) for f in faces), dtype=np.int64, count=len(faces))
            self.face_ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
            self.face_idx = (
                np.concatenate([np.asarray(f, dtype=np.int64) for f in faces])
                if len(faces) else np.zeros(0, dtype=np.int64)
            )
        if np.any(sizes < 3):
            raise MeshError("a face needs at least 3 vertices")
        self.owner = np.asarray(owner, dtype=np.int64)
        self.neighbor = np.asarray(neighbor, dtype=np.int64)
        nf = len(sizes)
        if self.owner.shape != (nf,) or self.neighbor.shape != (nf,):
            raise MeshError("owner/neighbor must have one entry per face")
        if patch is None:
            patch = np.where(self.neighbor < 0, 0, -1)
        self.patch = np.asarray(patch, dtype=np.int64)
        if np.any(self.face_idx < 0) or np.any(self.face_idx >= len(self.vertices)):
            raise MeshError("face references an unknown vertex")
        if nf == 0 or self.owner.min() < 0:
            raise MeshError("every face needs an owner cell")
        self.n_cells = int(max(self.owner.max(), self.neighbor.max()) + 1)
        if np.any(self.neighbor == self.owner):
            raise MeshError("face owner and neighbor coincide")
        self._build()
        for arr in self.__dict__.values():
            if isinstance(arr, np.ndarray):
                arr.flags.writeable = False

    # ------------------------------------------------------------------
    @property
    def n_faces(self) -> int:
        return len(self.owner)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tris(self) -> int:
        return len(self.tri_face)

    def face_vertices(self, g: int) -> np.ndarray:
        return self.face_idx[self.face_ptr[g]:self.face_ptr[g + 1]]

    def faces(self) -> list:
        return [self.face_vertices(g).tolist() for g in range(self.n_faces)]

    # ------------------------------------------------------------------
    def _build(self):
        X = self.vertices
        ptr, idx = self.face_ptr, self.face_idx
        nf = self.n_faces
        sizes = np.diff(ptr)
        face_of = np.repeat(np.arange(nf), sizes)
        # position of each loop entry's successor
        succ = np.arange(len(idx)) + 1
        succ[ptr[1:] - 1] = ptr[:-1]
        P = X[idx]
        Q = X[idx[succ]]

        scale = float(np.max(np.ptp(X, axis=0)))
        self.scale = scale

        x0 = np.add.reduceat(P, ptr[:-1], axis=0) / sizes[:, None]
        sub_area = 0.5 * np.linalg.norm(np.cross(P - x0[face_of], Q - x0[face_of]), axis=1)
        sub_cent = (P + Q + x0[face_of]) / 3.0
        tot = np.add.reduceat(sub_area, ptr[:-1])
        if np.any(tot <= DEGENERATE_AREA * scale**2):
            bad = int(np.flatnonzero(tot <= DEGENERATE_AREA * scale**2)[0])
            raise MeshError(f"degenerate face {bad}")
        xg = np.add.reduceat(sub_area[:, None] * sub_cent, ptr[:-1], axis=0) / tot[:, None]
        is_tri = sizes == 3
        xg[is_tri] = x0[is_tri]
        self.face_centers = xg

        # fan vector n_g = 1/2 sum (v_i - v_1) x (v_{i+1} - v_1)
        first = np.repeat(X[idx[ptr[:-1]]], sizes, axis=0)
        self.face_vectors = 0.5 * np.add.reduceat(np.cross(P - first, Q - first), ptr[:-1], axis=0)
        self.face_areas = np.linalg.norm(self.face_vectors, axis=1)

        # tessellation: triangles (v_i, v_{i+1}, x_g); triangular faces kept whole
        keep = ~is_tri[face_of]
        tri_a = np.concatenate([P[keep], X[idx[ptr[:-1][is_tri]]]])
        tri_b = np.concatenate([Q[keep], X[idx[ptr[:-1][is_tri] + 1]]])
        tri_c = np.concatenate([xg[face_of[keep]], X[idx[ptr[:-1][is_tri] + 2]]])
        tri_face = np.concatenate([face_of[keep], np.flatnonzero(is_tri)])
        order = np.argsort(tri_face, kind="stable")
        self.tri_face = tri_face[order]
        self.tri_pts = np.stack([tri_a[order], tri_b[order], tri_c[order]], axis=1)
        self.tri_centers = self.tri_pts.mean(axis=1)
        self.tri_normals = 0.5 * np.cross(
            self.tri_pts[:, 1] - self.tri_pts[:, 0], self.tri_pts[:, 2] - self.tri_pts[:, 0]
        )
        self.tri_areas = np.linalg.norm(self.tri_normals, axis=1)
        self.tri_owner = self.owner[self.tri_face]
        self.tri_neighbor = self.neighbor[self.tri_face]
        self.tri_ptr = np.searchsorted(self.tri_face, np.arange(nf + 1))

        self.internal_faces = np.flatnonzero(self.neighbor >= 0)
        self.boundary_faces = np.flatnonzero(self.neighbor < 0)
        self.internal_tris = np.flatnonzero(self.tri_neighbor >= 0)
        self.boundary_tris = np.flatnonzero(self.tri_neighbor < 0)

        nc = self.n_cells
        # closed-surface check: sum of outward normals per cell vanishes
        nsum = np.zeros((nc, 3))
        asum = np.zeros(nc)
        np.add.at(nsum, self.tri_owner, self.tri_normals)
        np.add.at(asum, self.tri_owner, self.tri_areas)
        it = self.internal_tris
        np.add.at(nsum, self.tri_neighbor[it], -self.tri_normals[it])
        np.add.at(asum, self.tri_neighbor[it], self.tri_areas[it])
        if np.any(asum == 0):
            raise MeshError("cell without faces")
        self.closure_defect = np.linalg.norm(nsum, axis=1) / asum
        if np.any(self.closure_defect > WATERTIGHT_TOL):
            bad = int(np.argmax(self.closure_defect))
            raise MeshError(f"cell {bad} is not watertight (defect {self.closure_defect[bad]:.3e})")
        self.cell_surface = asum

        # reference point per cell: mean of its face centers
        cnt = np.bincount(self.owner, minlength=nc) + np.bincount(
            self.neighbor[self.internal_faces], minlength=nc)
        ref = np.zeros((nc, 3))
        np.add.at(ref, self.owner, xg)
        np.add.at(ref, self.neighbor[self.internal_faces], xg[self.internal_faces])
        ref /= cnt[:, None]
        self.cell_n_faces = cnt

        # signed tetra (ref, a, b, c) volumes, seen from both sides of internal triangles
        def tets(cells, sign):
            r = ref[cells]
            a, b, c = (self.tri_pts[:, k] for k in range(3))
            if sign < 0:
                a, b, c = a[it], b[it], c[it]
            v = np.einsum("ij,ij->i", a - r, np.cross(b - r, c - r)) / 6.0 * sign
            cen = (r + a + b + c) / 4.0
            return v, cen

        vol = np.zeros(nc)
        mom = np.zeros((nc, 3))
        v, cen = tets(self.tri_owner, 1.0)
        np.add.at(vol, self.tri_owner, v)
        np.add.at(mom, self.tri_owner, v[:, None] * cen)
        v, cen = tets(self.tri_neighbor[it], -1.0)
        np.add.at(vol, self.tri_neighbor[it], v)
        np.add.at(mom, self.tri_neighbor[it], v[:, None] * cen)
        if np.any(vol <= 0):
            bad = int(np.argmin(vol))
            raise MeshError(f"cell {bad} has non-positive volume {vol[bad]:.3e}")
        self.cell_volumes = vol
        self.cell_centers = mom / vol[:, None]

        # cell -> faces (CSR), cell bounding boxes via face vertex extents
        cf_cells = np.concatenate([self.owner, self.neighbor[self.internal_faces]])
        cf_faces = np.concatenate([np.arange(nf), self.internal_faces])
        order = np.lexsort((cf_faces, cf_cells))
        self.cell_face_idx = cf_faces[order]
        self.cell_face_ptr = np.searchsorted(cf_cells[order], np.arange(nc + 1))

        fmin = np.minimum.reduceat(P, ptr[:-1], axis=0)
        fmax = np.maximum.reduceat(P, ptr[:-1], axis=0)
        bmin = np.full((nc, 3), np.inf)
        bmax = np.full((nc, 3), -np.inf)
        np.minimum.at(bmin, cf_cells, fmin[cf_faces])
        np.maximum.at(bmax, cf_cells, fmax[cf_faces])
        self.cell_bbox_min = bmin
        self.cell_bbox_max = bmax
        self.h = float(np.mean(np.prod(bmax - bmin, axis=1) ** (1.0 / 3.0)))

    # ------------------------------------------------------------------
    @cached_property
    def cell_tri_idx(self):
        """(ptr, tri index, side sign) CSR listing of the triangles bounding each cell."""
        it = self.internal_tris
        cells = np.concatenate([self.tri_owner, self.tri_neighbor[it]])
        tris = np.concatenate([np.arange(self.n_tris), it])
        sign = np.concatenate([np.ones(self.n_tris), -np.ones(len(it))])
        order = np.lexsort((tris, cells))
        ptr = np.searchsorted(cells[order], np.arange(self.n_cells + 1))
        return ptr, tris[order], sign[order]

    def cell_triangles(self, p: int) -> np.ndarray:
        """Outward-oriented triangles ``(t, 3, 3)`` bounding cell ``p``."""
        ptr, tris, sign = self.cell_tri_idx
        sl = slice(ptr[p], ptr[p + 1])
        pts = self.tri_pts[tris[sl]].copy()
        flip = sign[sl] < 0
        pts[flip] = pts[flip][:, ::-1]
        return pts

    def cell_vertices(self, p: int) -> np.ndarray:
        fs = self.cell_face_idx[self.cell_face_ptr[p]:self.cell_face_ptr[p + 1]]
        return np.unique(np.concatenate([self.face_vertices(g) for g in fs]))

    @cached_property
    def cell_radius(self) -> np.ndarray:
        """Largest distance from each cell center to its bounding points (vertices)."""
        ptr, tris, _ = self.cell_tri_idx
        cells = np.repeat(np.arange(self.n_cells), np.diff(ptr))
        d = np.linalg.norm(self.tri_pts[tris] - self.cell_centers[cells][:, None], axis=2).max(axis=1)
        r = np.zeros(self.n_cells)
        np.maximum.at(r, cells, d)
        return r

    @cached_property
    def boundary_vertex_mask(self) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        for g in self.boundary_faces:
            m[self.face_vertices(g)] = True
        return m

    def neighbors(self, p: int) -> np.ndarray:
        fs = self.cell_face_idx[self.cell_face_ptr[p]:self.cell_face_ptr[p + 1]]
        fs = fs[self.neighbor[fs] >= 0]
        return np.where(self.owner[fs] == p, self.neighbor[fs], self.owner[fs])

    @cached_property
    def adjacency(self):
        """Symmetric cell adjacency as a scipy CSR matrix with unit entries."""
        import scipy.sparse as sp

        g = self.internal_faces
        r = np.concatenate([self.owner[g], self.neighbor[g]])
        c = np.concatenate([self.neighbor[g], self.owner[g]])
        A = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(self.n_cells, self.n_cells))
        A.sum_duplicates()
        A.data[:] = 1.0
        return A

    def with_vertices(self, vertices) -> "PolyMesh":
        """Same topology, moved vertices."""
        return PolyMesh(vertices, (self.face_ptr.copy(), self.face_idx.copy()),
                        self.owner, self.neighbor, self.patch)

    def __repr__(self):
        return (f"PolyMesh(cells={self.n_cells}, faces={self.n_faces}, "
                f"tris={self.n_tris}, h={self.h:.4g})")
