"""
Linear system of one deferred-correction step.

Row ``p`` of the system discretises

    -eps * (diffusive flux balance) + (upwinded advective flux balance) = |cell volume|

with the advecting field frozen through the normal fluxes ``mu``.  Terms in
the unknown cell values of ``p`` and its face neighbours are implicit; every
gradient-dependent correction is explicit and lives in the right-hand side.
Boundary triangles are treated in three groups: on the source set
(Dirichlet), outflow (extrapolated flux) and inflow away from the source,
which contributes nothing so that no information enters through walls.
Rows of seeded cells are replaced by identity rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import MeshError, PolyMesh

SIGMA = 1e-12
SKEW_TOL = 1e-12
FLUX_SNAP = 1e-10  # relative to triangle area


class SparsityError(AssertionError):
    """Matrix entry outside the face-neighbour stencil."""


def compute_fluxes(mesh: PolyMesh, beta, sigma: float = SIGMA):
    """
    Normal flux ``beta/|beta|_sigma . n`` through every triangle, owner side.

    Fluxes at roundoff level are set to exactly zero so that tangential flow
    does not pick an inflow side at random.
    """
    beta = np.asarray(beta, dtype=float)
    norm = np.sqrt(np.einsum("ij,ij->i", beta, beta) + sigma**2)
    mu = np.einsum("ij,ij->i", beta, mesh.tri_normals) / norm
    mu[np.abs(mu) <= FLUX_SNAP * mesh.tri_areas] = 0.0
    return mu


@dataclass(frozen=True)
class SplitSets:
    """Triangle index sets split by flux sign (``mu == 0`` counts as outflow)."""

    inflow_owner: np.ndarray      # internal, mu < 0: enters the owner
    inflow_neighbor: np.ndarray   # internal, mu > 0: enters the neighbour
    internal_zero: np.ndarray     # internal, mu == 0
    boundary_in_dirichlet: np.ndarray
    boundary_in_wall: np.ndarray  # inflow through a wall: dropped
    boundary_out: np.ndarray      # mu >= 0, any boundary triangle
    boundary_out_wall: np.ndarray


def split_sets(mesh: PolyMesh, mu, dirichlet_mask) -> SplitSets:
    t, b = mesh.internal_tris, mesh.boundary_tris
    mu = np.asarray(mu)
    dm = np.asarray(dirichlet_mask, dtype=bool)
    bin_ = b[mu[b] < 0]
    bout = b[mu[b] >= 0]
    return SplitSets(
        inflow_owner=t[mu[t] < 0],
        inflow_neighbor=t[mu[t] > 0],
        internal_zero=t[mu[t] == 0],
        boundary_in_dirichlet=bin_[dm[bin_]],
        boundary_in_wall=bin_[~dm[bin_]],
        boundary_out=bout,
        boundary_out_wall=bout[~dm[bout]],
    )


def skewness_points(mesh: PolyMesh):
    """
    Offsets of the projected centers on every internal face.

    Returns ``(d_pp, d_qq, dist)`` where ``d_pp``/``d_qq`` move the owner and
    neighbour centers onto the line through the face center along the face
    normal, and ``dist`` is the distance between the projected points.
    """
    g = mesh.internal_faces
    nhat = mesh.face_vectors[g] / mesh.face_areas[g, None]
    xg = mesh.face_centers[g]
    dpg = xg - mesh.cell_centers[mesh.owner[g]]
    dqg = xg - mesh.cell_centers[mesh.neighbor[g]]
    sp_ = np.einsum("ij,ij->i", nhat, dpg)
    sq_ = np.einsum("ij,ij->i", nhat, dqg)
    d_pp = dpg - sp_[:, None] * nhat
    d_qq = dqg - sq_[:, None] * nhat
    dist = np.abs(sp_ - sq_)
    if np.any(dist < SKEW_TOL * mesh.h):
        raise MeshError("coincident projected centers")
    return d_pp, d_qq, dist


@dataclass
class SparseSystem:
    A: sp.csr_matrix
    f: np.ndarray

    def residual(self, u):
        return self.A @ u - self.f


def check_one_ring(A, mesh: PolyMesh):
    """Raise :class:`SparsityError` if ``A`` couples cells that share no face."""
    P = sp.csr_matrix(A, copy=True)
    P.eliminate_zeros()
    P.data[:] = 1.0
    allowed = mesh.adjacency + sp.identity(mesh.n_cells, format="csr")
    outside = P - P.multiply(allowed)
    outside.eliminate_zeros()
    if outside.nnz:
        r, c = outside.nonzero()
        raise SparsityError(f"{outside.nnz} entries outside the 1-ring, first at ({r[0]}, {c[0]})")


class Discretization:
    """
    Geometry-only data for assembling the regularised, linearised system.

    Parameters
    ----------
    mesh : PolyMesh
    pinned : (n_cells,) bool array
        Cells whose value is fixed (identity rows).
    pinned_values : (n_cells,) array
        Values on pinned cells (ignored elsewhere).
    dirichlet_mask : (n_tris,) bool array
        Boundary triangles on the source set.
    dirichlet_values : (n_tris,) array, optional
        Prescribed values on those triangles (default 0).
    """

    def __init__(self, mesh: PolyMesh, pinned, pinned_values, dirichlet_mask, dirichlet_values=None):
        self.mesh = mesh
        n = mesh.n_cells
        self.pinned = np.asarray(pinned, dtype=bool)
        self.pinned_idx = np.flatnonzero(self.pinned)
        self.pinned_values = np.where(self.pinned, np.asarray(pinned_values, dtype=float), 0.0)
        self.dirichlet_mask = np.asarray(dirichlet_mask, dtype=bool)
        self.dirichlet_values = (np.zeros(mesh.n_tris) if dirichlet_values is None
                                 else np.asarray(dirichlet_values, dtype=float))
        g = mesh.internal_faces
        self.fp, self.fq = mesh.owner[g], mesh.neighbor[g]
        self.d_pp, self.d_qq, dist = skewness_points(mesh)
        self.diff_coef = mesh.face_areas[g] / dist

        b = mesh.boundary_tris[self.dirichlet_mask[mesh.boundary_tris]]
        self.dtris = b
        nb = mesh.tri_normals[b]
        nhat = nb / np.linalg.norm(nb, axis=1)[:, None]
        dpb = mesh.tri_centers[b] - mesh.cell_centers[mesh.tri_owner[b]]
        s = np.einsum("ij,ij->i", nhat, dpb)
        self.d_pp_b = dpb - s[:, None] * nhat
        if np.any(np.abs(s) < SKEW_TOL * mesh.h):
            raise MeshError("cell center lies on a Dirichlet boundary triangle plane")
        self.diff_coef_b = mesh.tri_areas[b] / np.abs(s)

        self.d_pf = mesh.tri_centers - mesh.cell_centers[mesh.tri_owner]
        self.d_qf = np.zeros_like(self.d_pf)
        it = mesh.internal_tris
        self.d_qf[it] = mesh.tri_centers[it] - mesh.cell_centers[mesh.tri_neighbor[it]]
        self.volumes = mesh.cell_volumes
        self.n = n

    # ------------------------------------------------------------------
    def matrix(self, eps: float, mu) -> sp.csr_matrix:
        """Implicit part for regularisation ``eps`` and frozen fluxes ``mu``."""
        if not eps > 0:
            raise ValueError("eps must be positive")
        m = self.mesh
        s = split_sets(m, mu, self.dirichlet_mask)
        c = eps * self.diff_coef
        fp, fq = self.fp, self.fq
        io, inb, bd = s.inflow_owner, s.inflow_neighbor, s.boundary_in_dirichlet
        po, qo = m.tri_owner[io], m.tri_neighbor[io]
        pn, qn = m.tri_neighbor[inb], m.tri_owner[inb]
        rows = np.concatenate([fp, fq, fp, fq, po, po, pn, pn, m.tri_owner[self.dtris], m.tri_owner[bd]])
        cols = np.concatenate([fp, fq, fq, fp, po, qo, pn, qn, m.tri_owner[self.dtris], m.tri_owner[bd]])
        vals = np.concatenate([
            c, c, -c, -c,
            -mu[io], mu[io],
            mu[inb], -mu[inb],
            eps * self.diff_coef_b,
            -mu[bd],
        ])
        keep = ~self.pinned[rows]
        rows = np.concatenate([rows[keep], self.pinned_idx])
        cols = np.concatenate([cols[keep], self.pinned_idx])
        vals = np.concatenate([vals[keep], np.ones(len(self.pinned_idx))])
        A = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        A.sum_duplicates()
        A.sort_indices()
        # ensure an explicit diagonal entry on every row
        if np.any(A.diagonal() == 0):
            A = (A + sp.diags(np.zeros(self.n))).tocsr()
            A.sort_indices()
        check_one_ring(A, m)
        return A

    def rhs(self, eps: float, mu, grad, inflow_grad, splits: SplitSets | None = None):
        """
        Explicit right-hand side from the gradients of the previous iterate.

        Parameters
        ----------
        grad : (n_cells, 3) array
            Constrained least-squares cell gradients.
        inflow_grad : (n_cells, 3) array
            Inflow-based gradients.
        """
        m = self.mesh
        s = splits or split_sets(m, mu, self.dirichlet_mask)
        n = self.n
        f = self.volumes.copy()

        # skewness correction of the diffusive flux
        c = eps * self.diff_coef
        corr = c * (np.einsum("ij,ij->i", grad[self.fq], self.d_qq)
                    - np.einsum("ij,ij->i", grad[self.fp], self.d_pp))
        f += np.bincount(self.fp, corr, minlength=n) - np.bincount(self.fq, corr, minlength=n)

        # Dirichlet triangles
        if len(self.dtris):
            pb = m.tri_owner[self.dtris]
            val = eps * self.diff_coef_b * (
                self.dirichlet_values[self.dtris] - np.einsum("ij,ij->i", grad[pb], self.d_pp_b))
            f += np.bincount(pb, val, minlength=n)

        # outflow walls: extrapolated diffusive flux
        bo = s.boundary_out_wall
        if len(bo):
            val = eps * np.einsum("ij,ij->i", grad[m.tri_owner[bo]], m.tri_normals[bo])
            f += np.bincount(m.tri_owner[bo], val, minlength=n)

        # upwind face values: u_up + D_up . d_{up,f}, shared by both sides
        io = s.inflow_owner
        q = m.tri_neighbor[io]
        ext = mu[io] * np.einsum("ij,ij->i", inflow_grad[q], self.d_qf[io])
        f += -np.bincount(m.tri_owner[io], ext, minlength=n) + np.bincount(q, ext, minlength=n)
        inb = s.inflow_neighbor
        p = m.tri_owner[inb]
        ext = mu[inb] * np.einsum("ij,ij->i", inflow_grad[p], self.d_pf[inb])
        f += -np.bincount(p, ext, minlength=n) + np.bincount(m.tri_neighbor[inb], ext, minlength=n)

        bo = s.boundary_out
        if len(bo):
            p = m.tri_owner[bo]
            ext = mu[bo] * np.einsum("ij,ij->i", inflow_grad[p], self.d_pf[bo])
            f -= np.bincount(p, ext, minlength=n)

        bd = s.boundary_in_dirichlet
        if len(bd):
            f -= np.bincount(m.tri_owner[bd], mu[bd] * self.dirichlet_values[bd], minlength=n)

        f[self.pinned] = self.pinned_values[self.pinned]
        return f

    def assemble(self, eps, mu, grad, inflow_grad) -> SparseSystem:
        return SparseSystem(self.matrix(eps, mu), self.rhs(eps, mu, grad, inflow_grad))


def assemble(disc: Discretization, eps, mu, grad, inflow_grad) -> SparseSystem:
    return disc.assemble(eps, mu, grad, inflow_grad)
