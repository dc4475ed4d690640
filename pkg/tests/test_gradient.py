import numpy as np
import pytest
from conftest import lattice_mesh
from hypothesis import given
from hypothesis import strategies as st

from eikonal_fv.generators import Box, box_hex_mesh, perturb_mesh
from eikonal_fv.gradient import (FaceGradient, InflowGradient, LeastSquaresGradient, cell_gradient_wls,
                                 constrained_lsq, face_gradient_beta, inflow_gradient)


@pytest.fixture(scope="module")
def cube4():
    return box_hex_mesh(Box((0, 0, 0), (1, 1, 1)), 4)


@pytest.fixture(scope="module")
def wobbly():
    return perturb_mesh(box_hex_mesh(Box((-1, -1, -1), (1, 1, 1)), 6), 0.25, 11)


# ---------------------------------------------------------------- cell gradients
def test_constant_field_has_zero_gradient(cube4):
    np.testing.assert_allclose(cell_gradient_wls(cube4, np.full(cube4.n_cells, 3.7)), 0.0, atol=1e-13)


def test_linear_field_recovered(cube4):
    u = 0.5 * cube4.cell_centers[:, 0]
    np.testing.assert_allclose(cell_gradient_wls(cube4, u), [[0.5, 0, 0]] * cube4.n_cells, atol=1e-12)


def test_steep_field_is_projected(cube4):
    u = 2.0 * cube4.cell_centers[:, 0]
    g = cell_gradient_wls(cube4, u)
    np.testing.assert_allclose(g, [[1.0, 0, 0]] * cube4.n_cells, atol=1e-12)
    np.testing.assert_allclose(LeastSquaresGradient(cube4)(u, constrained=False),
                               [[2.0, 0, 0]] * cube4.n_cells, atol=1e-12)


def test_affine_exact_on_perturbed_mesh_with_dirichlet(wobbly):
    a = np.array([0.3, -0.5, 0.6])
    tris = wobbly.boundary_tris
    u = wobbly.cell_centers @ a + 1.5
    ud = wobbly.tri_centers[tris] @ a + 1.5
    g = LeastSquaresGradient(wobbly, tris)(u, ud)
    np.testing.assert_allclose(g, np.tile(a, (wobbly.n_cells, 1)), atol=1e-11)


def test_rank_deficient_chain_flagged(chain3):
    op = LeastSquaresGradient(chain3)
    assert len(op.rank_deficient) == 3
    g = op(np.array([0.0, 0.5, 1.0]))
    np.testing.assert_allclose(g[:, 0], 0.5, atol=1e-8)
    np.testing.assert_allclose(g[:, 1:], 0.0, atol=1e-12)


def test_interior_stencil_is_full_rank():
    m = lattice_mesh(2, 2, 2)
    assert len(LeastSquaresGradient(m).rank_deficient) == 0


@given(st.integers(0, 10_000), st.floats(0.5, 5.0))
def test_gradient_norm_bounded(seed, amp):
    m = box_hex_mesh(Box((0, 0, 0), (1, 1, 1)), 3)
    u = amp * np.random.default_rng(seed).normal(size=m.n_cells)
    g = cell_gradient_wls(m, u)
    assert np.all(np.linalg.norm(g, axis=1) <= 1 + 1e-12)


@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_scale_equivariance(seed, s):
    m = perturb_mesh(box_hex_mesh(Box((0, 0, 0), (1, 1, 1)), 3), 0.2, seed % 97)
    u = np.random.default_rng(seed).uniform(0, 1, m.n_cells)
    ms = m.with_vertices(s * m.vertices)
    np.testing.assert_allclose(cell_gradient_wls(ms, s * u), cell_gradient_wls(m, u), atol=1e-9)


# ---------------------------------------------------------------- constrained solve
def _objective(M, r, y):
    return y @ M @ y - 2 * r @ y


def _sphere_samples(n=4000):
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    th = np.pi * (1 + 5**0.5) * i
    return np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)


spd = st.integers(0, 100_000).map(lambda s: np.random.default_rng(s))


@given(spd)
def test_constrained_lsq_kkt(rng):
    B = rng.normal(size=(3, 3))
    M = B @ B.T + 0.05 * np.eye(3)
    r = rng.normal(size=3) * rng.uniform(0.1, 5)
    y = constrained_lsq(M[None], r[None])[0]
    free = np.linalg.solve(M, r)
    if np.linalg.norm(free) <= 1:
        np.testing.assert_allclose(y, free, rtol=1e-10, atol=1e-12)
        return
    assert abs(np.linalg.norm(y) - 1) < 1e-12
    # stationarity: r - M y = lam y with lam >= 0
    g = r - M @ y
    lam = g @ y
    assert lam >= -1e-9
    np.testing.assert_allclose(g, lam * y, atol=1e-8 * max(1.0, abs(lam)))
    # global optimality against a dense sphere sampling
    S = _sphere_samples()
    vals = np.einsum("ni,ij,nj->n", S, M, S) - 2 * S @ r
    assert _objective(M, r, y) <= vals.min() + 1e-12


def test_constrained_lsq_hard_case_direction():
    M = np.diag([1.0, 1.0, 4.0])
    r = np.array([0.0, 0.0, 8.0])
    np.testing.assert_allclose(constrained_lsq(M[None], r[None])[0], [0, 0, 1], atol=1e-14)


# ---------------------------------------------------------------- face gradients
def test_face_gradient_blend(chain3):
    grad = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 0]])
    beta = face_gradient_beta(chain3, grad)
    t01 = [t for t in chain3.internal_tris if {chain3.tri_owner[t], chain3.tri_neighbor[t]} == {0, 1}]
    assert t01
    # triangles of a square face sit at equal distance from both centers
    for t in t01:
        np.testing.assert_allclose(beta[t], [0.5, 0.5, 0.0], atol=1e-14)


def test_face_gradient_clipped(chain3):
    grad = np.tile([1.3, 0.0, 0.0], (3, 1))
    beta = FaceGradient(chain3)(grad)
    np.testing.assert_allclose(beta, np.tile([1.0, 0, 0], (chain3.n_tris, 1)), atol=1e-15)


def test_face_gradient_inverse_distance_weights():
    m = lattice_mesh(2, 1, 1, spacing=(1.0, 1.0, 1.0))
    # stretch the second cell to length 3 along x
    v = m.vertices.copy()
    v[v[:, 0] > 1.5, 0] = 4.0
    m = m.with_vertices(v)
    fg = FaceGradient(m)
    t = m.internal_tris[0]
    dp, dq = fg.dist_owner[t], fg.dist_neighbor[t]
    beta = fg(np.array([[0.0, 0, 0], [0.9, 0, 0]]))
    np.testing.assert_allclose(beta[t, 0], 0.9 * (1 / dq) / (1 / dp + 1 / dq))


def test_boundary_face_gradient_uses_owner(cube4):
    grad = np.random.default_rng(0).uniform(-0.5, 0.5, (cube4.n_cells, 3))
    beta = face_gradient_beta(cube4, grad)
    b = cube4.boundary_tris
    np.testing.assert_allclose(beta[b], grad[cube4.tri_owner[b]])


# ---------------------------------------------------------------- inflow gradients
def test_inflow_gradient_chain(chain3):
    m = chain3
    beta = np.zeros((m.n_tris, 3))
    beta[:, 0] = 0.7
    # flow in +x: owner->neighbour on internal tris oriented +x
    mu = np.einsum("ij,j->i", m.tri_normals, [1.0, 0, 0])
    D = inflow_gradient(m, beta, mu)
    # cell 0 has no inflow triangle (wall inflow is dropped); 1 and 2 inherit 0.7
    np.testing.assert_allclose(D[0], 0.0)
    np.testing.assert_allclose(D[1:, 0], 0.7)


def test_inflow_gradient_dirichlet_boundary(chain3):
    m = chain3
    mu = np.einsum("ij,j->i", m.tri_normals, [1.0, 0, 0])
    dm = np.zeros(m.n_tris, bool)
    dm[m.boundary_tris[(m.tri_owner[m.boundary_tris] == 0) & (mu[m.boundary_tris] < 0)]] = True
    beta = np.tile([0.4, 0.1, 0.0], (m.n_tris, 1))
    D = InflowGradient(m, mu, dm)(beta)
    np.testing.assert_allclose(D, np.tile([0.4, 0.1, 0.0], (3, 1)))


def test_inflow_gradient_is_weighted_average(cube4):
    rng = np.random.default_rng(3)
    beta = rng.uniform(-0.5, 0.5, (cube4.n_tris, 3))
    mu = rng.normal(size=cube4.n_tris)
    op = InflowGradient(cube4, mu, np.zeros(cube4.n_tris, bool))
    D = op(beta)
    # an average of vectors lies in their bounding box
    for p in range(cube4.n_cells):
        sel = op.cells == p
        if not sel.any():
            assert np.all(D[p] == 0)
            continue
        B = beta[op.tris[sel]]
        assert np.all(D[p] >= B.min(0) - 1e-15) and np.all(D[p] <= B.max(0) + 1e-15)
