"""
Gradient reconstructions on the cell-centered mesh.

* constrained weighted least-squares cell gradients (norm at most one),
* face gradients on triangles, blended from the two adjacent cells,
* the inflow-based gradient, an average of face gradients over the
  triangles through which the advecting field enters a cell.
"""

from __future__ import annotations

import logging

import numpy as np

from .mesh import PolyMesh

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
NORM_SLACK = 1e-12


def _clip_unit(v):
    n = np.linalg.norm(v, axis=-1)
    scale = np.where(n > 1.0, 1.0 / np.maximum(n, 1e-300), 1.0)
    return v * scale[..., None]


def constrained_lsq(M, r, max_iter=100):
    """
    Solve ``argmin_{|y| <= 1} y.M y - 2 r.y`` for a batch of SPD 3x3 systems.

    The interior minimiser ``M^{-1} r`` is returned where its norm is at most
    one; otherwise the multiplier ``lam`` of ``(M + lam I) y = r, |y| = 1`` is
    found by Newton iteration on ``1/|y(lam)| - 1``.

    Parameters
    ----------
    M : (n, 3, 3) array
    r : (n, 3) array

    Returns
    -------
    (n, 3) array
    """
    M = np.asarray(M, dtype=float)
    r = np.asarray(r, dtype=float)
    w, V = np.linalg.eigh(M)
    return _constrained_from_eig(w, V, r, max_iter)


def _constrained_from_eig(w, V, r, max_iter=100):
    c = np.einsum("nji,nj->ni", V, r)
    y = np.einsum("nij,nj->ni", V, c / w)
    norm = np.linalg.norm(y, axis=1)
    out = np.flatnonzero(norm > 1.0)
    if len(out) == 0:
        return y
    wo, co = w[out], c[out]
    lam = np.zeros(len(out))
    for _ in range(max_iter):
        den = wo + lam[:, None]
        s2 = np.sum(co**2 / den**2, axis=1)
        s3 = np.sum(co**2 / den**3, axis=1)
        nrm = np.sqrt(s2)
        phi = 1.0 / nrm - 1.0
        step = phi * nrm**3 / s3
        lam = np.maximum(lam - step, 0.0)
        if np.all(np.abs(phi) < 1e-14):
            break
    yo = np.einsum("nij,nj->ni", V[out], co / (wo + lam[:, None]))
    yo /= np.linalg.norm(yo, axis=1)[:, None]
    y[out] = yo
    return y


class LeastSquaresGradient:
    """
    Cell-gradient operator over the stencil ``neighbours + Dirichlet triangles``.

    The weighted normal matrices depend on geometry only, so they are
    factorised once.  Cells whose stencil spans fewer than three directions get
    a small Tikhonov shift and are listed in :attr:`rank_deficient`.
    """

    def __init__(self, mesh: PolyMesh, dirichlet_tris=()):
        self.mesh = mesh
        g = mesh.internal_faces
        p, q = mesh.owner[g], mesh.neighbor[g]
        d = mesh.cell_centers[q] - mesh.cell_centers[p]
        self.dirichlet_tris = np.asarray(dirichlet_tris, dtype=np.int64)
        b = self.dirichlet_tris
        pb = mesh.tri_owner[b]
        db = mesh.tri_centers[b] - mesh.cell_centers[pb]

        # one entry per (cell, stencil member); internal faces counted from both sides
        self._rows = np.concatenate([p, q, pb])
        self._cols = np.concatenate([q, p])
        self._d = np.concatenate([d, -d, db])
        self._w = 1.0 / np.einsum("ij,ij->i", self._d, self._d)
        self._nint = 2 * len(g)

        n = mesh.n_cells
        wdd = self._w[:, None, None] * np.einsum("ni,nj->nij", self._d, self._d)
        M = np.zeros((n, 3, 3))
        for i in range(3):
            for j in range(i, 3):
                M[:, i, j] = np.bincount(self._rows, wdd[:, i, j], minlength=n)
                M[:, j, i] = M[:, i, j]
        tr = np.trace(M, axis1=1, axis2=2)
        w, V = np.linalg.eigh(M)
        bad = w[:, 0] <= RANK_TOL * np.maximum(tr, 1e-300)
        self.rank_deficient = np.flatnonzero(bad)
        if len(self.rank_deficient):
            logger.warning("rank-deficient gradient stencil in %d cells", len(self.rank_deficient))
            M[bad] += RANK_TOL * tr[bad, None, None] * np.eye(3)
            w[bad], V[bad] = np.linalg.eigh(M[bad])
        self.normal_matrix = M
        self._eig = (w, V)

    def rhs(self, u, u_dirichlet=None):
        n = self.mesh.n_cells
        ua = np.empty(len(self._rows))
        ua[: self._nint] = u[self._cols]
        if len(self.dirichlet_tris):
            ua[self._nint:] = 0.0 if u_dirichlet is None else u_dirichlet
        diff = self._w * (ua - u[self._rows])
        return np.stack(
            [np.bincount(self._rows, diff * self._d[:, k], minlength=n) for k in range(3)], axis=1
        )

    def __call__(self, u, u_dirichlet=None, constrained=True):
        """Cell gradients of ``u``; ``u_dirichlet`` holds values on the Dirichlet triangles."""
        r = self.rhs(np.asarray(u, dtype=float), u_dirichlet)
        w, V = self._eig
        if not constrained:
            c = np.einsum("nji,nj->ni", V, r)
            return np.einsum("nij,nj->ni", V, c / w)
        return _constrained_from_eig(w, V, r)


def cell_gradient_wls(mesh: PolyMesh, u, dirichlet_tris=(), u_dirichlet=None):
    """One-shot constrained least-squares gradients (see :class:`LeastSquaresGradient`)."""
    return LeastSquaresGradient(mesh, dirichlet_tris)(u, u_dirichlet)


class FaceGradient:
    """Inverse-distance blend of the two adjacent cell gradients, clipped to the unit ball."""

    def __init__(self, mesh: PolyMesh):
        self.mesh = mesh
        t = mesh.internal_tris
        self.dist_owner = np.linalg.norm(mesh.tri_centers - mesh.cell_centers[mesh.tri_owner], axis=1)
        self.dist_neighbor = np.zeros(mesh.n_tris)
        self.dist_neighbor[t] = np.linalg.norm(
            mesh.tri_centers[t] - mesh.cell_centers[mesh.tri_neighbor[t]], axis=1)
        wp = 1.0 / self.dist_owner
        wq = np.zeros(mesh.n_tris)
        wq[t] = 1.0 / self.dist_neighbor[t]
        self._wp = wp / (wp + wq)
        self._wq = wq / (wp + wq)

    def __call__(self, grad):
        m = self.mesh
        beta = self._wp[:, None] * grad[m.tri_owner]
        t = m.internal_tris
        beta[t] += self._wq[t, None] * grad[m.tri_neighbor[t]]
        return _clip_unit(beta)


def face_gradient_beta(mesh: PolyMesh, grad):
    return FaceGradient(mesh)(grad)


class InflowGradient:
    """
    Inverse-distance average of face gradients over inflow triangles.

    Parameters
    ----------
    mesh : PolyMesh
    mu : (n_tris,) array
        Normal fluxes seen from the owner cell.
    dirichlet_mask : (n_tris,) bool array
        Boundary triangles lying on the source set.
    """

    def __init__(self, mesh: PolyMesh, mu, dirichlet_mask, face_gradient: FaceGradient | None = None):
        fg = face_gradient or FaceGradient(mesh)
        t = mesh.internal_tris
        b = mesh.boundary_tris
        into_owner_int = t[mu[t] < 0]
        into_nb = t[mu[t] > 0]
        into_owner_bnd = b[(mu[b] < 0) & dirichlet_mask[b]]
        own = np.concatenate([into_owner_int, into_owner_bnd])
        self.cells = np.concatenate([mesh.tri_owner[own], mesh.tri_neighbor[into_nb]])
        self.tris = np.concatenate([own, into_nb])
        self.weights = np.concatenate([1.0 / fg.dist_owner[own], 1.0 / fg.dist_neighbor[into_nb]])
        self.n = mesh.n_cells
        self.wsum = np.bincount(self.cells, self.weights, minlength=self.n)

    def __call__(self, beta):
        wb = self.weights[:, None] * beta[self.tris]
        num = np.stack([np.bincount(self.cells, wb[:, k], minlength=self.n) for k in range(3)], axis=1)
        safe = np.where(self.wsum > 0, self.wsum, 1.0)
        return np.where(self.wsum[:, None] > 0, num / safe[:, None], 0.0)


def inflow_gradient(mesh: PolyMesh, beta, mu, dirichlet_mask=None):
    if dirichlet_mask is None:
        dirichlet_mask = np.zeros(mesh.n_tris, dtype=bool)
    return InflowGradient(mesh, mu, dirichlet_mask)(beta)
