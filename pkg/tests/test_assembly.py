import numpy as np
import pytest
import scipy.sparse as sp
from conftest import lattice_mesh
from hypothesis import given
from hypothesis import strategies as st

from eikonal_fv.assembly import (Discretization, SparsityError, assemble, check_one_ring, compute_fluxes,
                                 skewness_points, split_sets)
from eikonal_fv.generators import Box, box_hex_mesh, perturb_mesh
from eikonal_fv.gradient import FaceGradient, InflowGradient


def _disc(mesh, pinned=(), values=None, dirichlet=None):
    mask = np.zeros(mesh.n_cells, bool)
    mask[list(pinned)] = True
    vals = np.zeros(mesh.n_cells) if values is None else values
    dm = np.zeros(mesh.n_tris, bool) if dirichlet is None else dirichlet
    return Discretization(mesh, mask, vals, dm)


# ---------------------------------------------------------------- fluxes and splits
def test_flux_examples(unit_cube):
    m = unit_cube
    beta = np.tile([1.0, 0.0, 0.0], (m.n_tris, 1))
    mu = compute_fluxes(m, beta)
    np.testing.assert_allclose(mu, m.tri_normals[:, 0], atol=1e-15)
    # a face of area 1 split into triangles sums to its normal flux
    assert np.isclose(np.sum(np.abs(mu)), 2.0)
    zero = compute_fluxes(m, np.zeros((m.n_tris, 3)))
    assert np.all(zero == 0)


def test_roundoff_fluxes_are_zero(unit_cube):
    beta = np.tile([1e-14, 1.0, 0.0], (unit_cube.n_tris, 1))
    mu = compute_fluxes(unit_cube, beta)
    x_faces = np.abs(unit_cube.tri_normals[:, 0]) > 0.5
    assert np.all(mu[x_faces] == 0.0)
    assert np.all(mu[~x_faces & (np.abs(unit_cube.tri_normals[:, 1]) > 0)] != 0.0)


def test_flux_regularisation_scale(unit_cube):
    beta = np.tile([3.0, 0.0, 4.0], (unit_cube.n_tris, 1))
    mu = compute_fluxes(unit_cube, beta)
    np.testing.assert_allclose(mu, unit_cube.tri_normals @ np.array([0.6, 0.0, 0.8]))


def test_split_sets_partition():
    m = box_hex_mesh(Box((0, 0, 0), (1, 1, 1)), 3)
    rng = np.random.default_rng(0)
    mu = rng.normal(size=m.n_tris)
    mu[m.internal_tris[:5]] = 0.0
    dm = np.zeros(m.n_tris, bool)
    dm[m.boundary_tris[::3]] = True
    s = split_sets(m, mu, dm)
    internal = np.concatenate([s.inflow_owner, s.inflow_neighbor, s.internal_zero])
    assert sorted(internal) == sorted(m.internal_tris)
    boundary = np.concatenate([s.boundary_in_dirichlet, s.boundary_in_wall, s.boundary_out])
    assert sorted(boundary) == sorted(m.boundary_tris)
    assert set(s.boundary_out_wall) <= set(s.boundary_out)
    assert np.all(dm[s.boundary_in_dirichlet]) and not np.any(dm[s.boundary_in_wall])
    assert np.all(mu[s.inflow_owner] < 0) and np.all(mu[s.inflow_neighbor] > 0)


# ---------------------------------------------------------------- skewness
def test_skewness_orthogonal_mesh():
    m = box_hex_mesh(Box((0, 0, 0), (1, 1, 1)), 4)
    d_pp, d_qq, dist = skewness_points(m)
    assert np.abs(d_pp).max() < 1e-14 and np.abs(d_qq).max() < 1e-14
    np.testing.assert_allclose(dist, 0.25)


def test_skewness_perturbed_mesh():
    m = perturb_mesh(box_hex_mesh(Box((0, 0, 0), (1, 1, 1)), 4), 0.25, 2)
    d_pp, d_qq, dist = skewness_points(m)
    g = m.internal_faces
    nhat = m.face_vectors[g] / m.face_areas[g, None]
    assert np.abs(np.einsum("ij,ij->i", d_pp, nhat)).max() < 1e-14
    assert np.abs(np.einsum("ij,ij->i", d_qq, nhat)).max() < 1e-14
    pp = m.cell_centers[m.owner[g]] + d_pp
    qq = m.cell_centers[m.neighbor[g]] + d_qq
    np.testing.assert_allclose(np.linalg.norm(qq - pp, axis=1), dist, rtol=1e-12)
    # projected points and face center are collinear along the normal
    off = np.cross(pp - m.face_centers[g], nhat)
    assert np.abs(off).max() < 1e-13


def test_skewness_hand_pair():
    m = lattice_mesh(2, 1, 1)
    v = m.vertices.copy()
    v[v[:, 0] > 1.5, 1] += 0.6  # shear the far cell in y
    m = m.with_vertices(v)
    d_pp, d_qq, dist = skewness_points(m)
    # face x=1 is unchanged; the far center moves 0.3 in y
    np.testing.assert_allclose(d_pp[0], 0.0, atol=1e-15)
    np.testing.assert_allclose(d_qq[0], [0, -0.3, 0], atol=1e-14)
    np.testing.assert_allclose(dist[0], 1.0)


# ---------------------------------------------------------------- matrices by hand
def test_chain_hand_assembly(chain3):
    eps = 0.3
    d = _disc(chain3, pinned=(0, 2), values=np.array([0.25, 0, 0.75]))
    mu = np.zeros(chain3.n_tris)
    A = d.matrix(eps, mu).toarray()
    np.testing.assert_allclose(A, [[1, 0, 0], [-eps, 2 * eps, -eps], [0, 0, 1]], atol=1e-15)
    f = d.rhs(eps, mu, np.zeros((3, 3)), np.zeros((3, 3)))
    np.testing.assert_allclose(f, [0.25, 1.0, 0.75])


def test_interior_row_is_seven_point():
    m = lattice_mesh(3, 3, 3, spacing=(0.5, 0.5, 0.5))
    eps = 0.7
    A = _disc(m).matrix(eps, np.zeros(m.n_tris))
    c = 13
    row = A.getrow(c).toarray().ravel()
    nb = [4, 10, 12, 14, 16, 22]
    # area / distance = 0.25 / 0.5
    assert np.isclose(row[c], 6 * eps * 0.5)
    np.testing.assert_allclose(row[nb], -eps * 0.5)
    assert np.count_nonzero(row) == 7


def test_pinned_rows_are_identity():
    m = box_hex_mesh(Box((0, 0, 0), (1, 1, 1)), 3)
    vals = np.arange(m.n_cells, dtype=float)
    d = _disc(m, pinned=(0, 5, 13), values=vals)
    mu = np.random.default_rng(1).normal(size=m.n_tris)
    sysm = assemble(d, 0.1, mu, np.zeros((m.n_cells, 3)), np.zeros((m.n_cells, 3)))
    for p in (0, 5, 13):
        row = sysm.A.getrow(p).toarray().ravel()
        assert row[p] == 1 and np.count_nonzero(row) == 1
        assert sysm.f[p] == vals[p]


def test_upwind_inflow_entries():
    m = lattice_mesh(2, 1, 1)
    mu = compute_fluxes(m, np.tile([1.0, 0, 0], (m.n_tris, 1)))
    A = _disc(m).matrix(1e-6, mu).toarray()
    # flux 1 enters cell 1 from cell 0 through the shared unit face
    assert np.isclose(A[1, 0], -1e-6 - 1.0)
    assert np.isclose(A[1, 1], 1e-6 + 1.0)
    assert np.isclose(A[0, 1], -1e-6)


@given(st.integers(0, 10_000))
def test_m_matrix_sign_pattern(seed):
    rng = np.random.default_rng(seed)
    m = perturb_mesh(box_hex_mesh(Box((0, 0, 0), (1, 1, 1)), 3), 0.2, seed % 31)
    mu = rng.normal(size=m.n_tris)
    dm = np.zeros(m.n_tris, bool)
    dm[m.boundary_tris[rng.random(len(m.boundary_tris)) < 0.3]] = True
    d = Discretization(m, np.zeros(m.n_cells, bool), np.zeros(m.n_cells), dm)
    A = d.matrix(rng.uniform(1e-4, 1), mu)
    off = A - sp.diags(A.diagonal())
    assert off.data.max(initial=0.0) <= 0
    assert np.all(A.diagonal() > 0)
    # rows untouched by Dirichlet triangles annihilate constants
    touched = np.zeros(m.n_cells, bool)
    touched[m.tri_owner[dm]] = True
    rs = np.asarray(A.sum(axis=1)).ravel()
    assert np.abs(rs[~touched]).max() < 1e-12


def test_linear_field_is_consistent_on_interior_cells():
    m = perturb_mesh(box_hex_mesh(Box((0, 0, 0), (1, 1, 1)), 5), 0.2, 7)
    a = np.array([0.48, -0.6, 0.64])
    u = m.cell_centers @ a
    grad = np.tile(a, (m.n_cells, 1))
    fg = FaceGradient(m)
    beta = fg(grad)
    mu = compute_fluxes(m, beta)
    d = _disc(m)
    inflow = InflowGradient(m, mu, d.dirichlet_mask, fg)(beta)
    s = d.assemble(0.05, mu, grad, inflow)
    interior = np.ones(m.n_cells, bool)
    interior[m.tri_owner[m.boundary_tris]] = False
    assert interior.sum() == 27
    r = s.residual(u)[interior] / m.cell_volumes[interior]
    assert np.abs(r).max() < 1e-11


def test_assembly_is_deterministic():
    m = perturb_mesh(box_hex_mesh(Box((0, 0, 0), (1, 1, 1)), 4), 0.2, 5)
    rng = np.random.default_rng(9)
    mu = rng.normal(size=m.n_tris)
    g = rng.uniform(-0.5, 0.5, (m.n_cells, 3))
    d = _disc(m, pinned=(1, 2))
    s1 = d.assemble(0.2, mu, g, g)
    s2 = _disc(m, pinned=(1, 2)).assemble(0.2, mu, g, g)
    assert s1.A.data.tobytes() == s2.A.data.tobytes()
    assert s1.A.indices.tobytes() == s2.A.indices.tobytes()
    assert s1.f.tobytes() == s2.f.tobytes()


def test_one_ring_violation_detected():
    m = lattice_mesh(3, 1, 1)
    A = sp.csr_matrix(np.array([[1.0, -1, 0.5], [-1, 2, -1], [0, -1, 1]]))
    with pytest.raises(SparsityError):
        check_one_ring(A, m)
    check_one_ring(sp.csr_matrix(np.array([[1.0, -1, 0], [-1, 2, -1], [0, -1, 1]])), m)


def test_eps_must_be_positive(chain3):
    with pytest.raises(ValueError):
        _disc(chain3).matrix(0.0, np.zeros(chain3.n_tris))
