"""
Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``python tests/test_acceptance.py`` or ``pytest tests/test_acceptance.py -s``.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
from conftest import ACCEPTANCE

import eikonal_fv.assembly as assembly
from eikonal_fv.assembly import Discretization
from eikonal_fv.driver import EikonalSolver, run_algorithm
from eikonal_fv.gamma import build_seed_set
from eikonal_fv.generators import Box, box_hex_mesh, perturb_mesh
from eikonal_fv.gradient import LeastSquaresGradient, cell_gradient_wls
from eikonal_fv.oracle import GeodesicOracle
from eikonal_fv.study import (EXAMPLES, GAMMA1, StudySettings, compute_eoc, error_norms, example, make_mesh,
                              run_convergence_study, with_levels)


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _fmt(xs, spec=".3e"):
    return "[" + ", ".join(format(x, spec) for x in xs) + "]"


# ---------------------------------------------------------------- 1
def test_criterion_01_square_source_eoc():
    t0 = time.perf_counter()
    rep = run_convergence_study(with_levels(example("EX9"), (16, 24, 32)))
    dt = time.perf_counter() - t0
    eoc = rep.eoc_l1
    monotone = all(b <= a for a, b in zip(rep.e1, rep.e1[1:]))
    ok = eoc[-1] >= 1.5 and monotone and dt <= 600
    record(1, ok, f"EX9 16/24/32 E1={_fmt(rep.e1)} L1 EOC={_fmt(eoc, '.2f')} (need finest >= 1.5, "
                  f"monotone E1) {dt:.0f}s")


# ---------------------------------------------------------------- 2 and 3
@pytest.fixture(scope="module")
def ex1_study():
    t0 = time.perf_counter()
    rep = run_convergence_study(example("EX1"), StudySettings(keep_stage_errors=True))
    return rep, time.perf_counter() - t0


def test_criterion_02_sphere_source_eoc(ex1_study):
    rep, dt = ex1_study
    l1, linf = rep.eoc_l1, rep.eoc_linf
    ok = l1[-1] >= 1.2 and 0.5 <= linf[-1] <= 1.5 and dt <= 600
    record(2, ok, f"EX1 {'/'.join(str(lv.shape[0]) for lv in rep.levels)} L1 EOC={_fmt(l1, '.2f')} "
                  f"Linf EOC={_fmt(linf, '.2f')} (need L1 >= 1.2, Linf in [0.5, 1.5]) {dt:.0f}s")


def test_criterion_03_error_decreases_with_eps(ex1_study):
    rep, _ = ex1_study
    lv = rep.levels[0]
    e1 = [e for e, _ in lv.stage_errors[1:]]
    ok = all(b < a for a, b in zip(e1, e1[1:]))
    record(3, ok, f"EX1 {lv.shape[0]}^3 E1 after stages 2..5 = {_fmt(e1)} (strictly decreasing)")


# ---------------------------------------------------------------- 4
def test_criterion_04_shadow_region_follows_geodesics():
    prob = example("EX3")
    shape = (24, 24, 8)
    mesh = make_mesh(prob.domain, shape)
    res = run_algorithm(mesh, prob.gamma)
    oracle = GeodesicOracle(prob.domain, prob.gamma, tuple(4 * s for s in shape))
    x = mesh.cell_centers
    shadow = (x[:, 1] < -5 * GAMMA1) & (x[:, 0] > -5 * GAMMA1) & ~res.pinned
    ref = oracle(x[shadow])
    tol = np.maximum(2 * mesh.h, oracle.bias_bound(ref))
    err = np.abs(res.u[shadow] - ref)
    follows = bool(np.all(err <= tol))

    probes = np.array([[10, -10, 0], [5, -12, 0], [12, -7, 0]]) * GAMMA1
    cells = [int(np.argmin(np.linalg.norm(x - p, axis=1))) for p in probes]
    pref = oracle(x[cells])
    straight = prob.gamma.distance(x[cells])
    ptol = np.maximum(2 * mesh.h, oracle.bias_bound(pref))
    apart = bool(np.all(np.abs(straight - pref) > ptol))
    close = bool(np.all(np.abs(res.u[cells] - pref) <= ptol))
    ok = follows and apart and close
    record(4, ok, f"EX3 24x24x8: {shadow.sum()} shadow cells, max |u-oracle|/tol={np.max(err / tol):.2f}; "
                  f"probes u={_fmt(res.u[cells], '.3f')} oracle={_fmt(pref, '.3f')} "
                  f"straight={_fmt(straight, '.3f')} tol={_fmt(ptol, '.3f')}")


# ---------------------------------------------------------------- 5
def test_criterion_05_residual_contract():
    worst, bad, lines = 0.0, [], []
    for name in EXAMPLES:
        prob = example(name)
        mesh = make_mesh(prob.domain, prob.levels[0])
        res = run_algorithm(mesh, prob.gamma)
        for st in res.stages[1:]:
            worst = max(worst, st.residuals[-1])
            if not (st.residuals[-1] < 1e-8 and st.iterations <= 200):
                bad.append((name, st.n))
        lines.append(f"{name}:K={res.iterations}")
    ok = not bad
    record(5, ok, f"max final rho={worst:.2e} over EX1..EX10 first levels; " + " ".join(lines)
           + (f" failures={bad}" if bad else ""))


# ---------------------------------------------------------------- 6
def _poisson_7pt(centers, spacing, lo, n, eps, pinned):
    """Two-point-flux Laplacian written from grid indices only."""
    ijk = np.rint((centers - lo) / spacing - 0.5).astype(int)
    index = {tuple(t): c for c, t in enumerate(ijk)}
    A = np.zeros((len(centers),) * 2)
    coef = spacing**2 / spacing  # face area over center distance
    for c, (i, j, k) in enumerate(ijk):
        if pinned[c]:
            A[c, c] = 1.0
            continue
        for d in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            nb = (i + d[0], j + d[1], k + d[2])
            if all(0 <= t < n for t in nb):
                A[c, c] += eps * coef
                A[c, index[nb]] -= eps * coef
    return A


def test_criterion_06_poisson_equivalence():
    prob = example("EX1")
    mesh = box_hex_mesh(prob.domain, 8)
    seeds = build_seed_set(mesh, prob.gamma)
    pinned = seeds.mask(mesh.n_cells)
    disc = Discretization(mesh, pinned, seeds.full_values(mesh.n_cells), np.zeros(mesh.n_tris, bool))
    eps = mesh.h ** 0.5
    A = disc.matrix(eps, assembly.compute_fluxes(mesh, np.zeros((mesh.n_tris, 3)))).toarray()
    B = _poisson_7pt(mesh.cell_centers, 2.5 / 8, np.array(prob.domain.lo), 8, eps, pinned)
    rel = np.abs(A - B).max() / np.abs(B).max()
    ok = rel <= 1e-12 and (A != 0).sum() == (B != 0).sum()
    record(6, ok, f"8^3 beta=0: max |A-B|/max|B| = {rel:.1e} (need <= 1e-12), nnz {int((A != 0).sum())}")


# ---------------------------------------------------------------- 7
def _geometry_failures(mesh, rng):
    f = []
    scale = mesh.h
    # closed cell surfaces: oriented triangle normals sum to zero
    if mesh.closure_defect.max() > 1e-12 * scale**2:
        f.append("closure")
    # opposite orientation seen from the two sides
    ptr, tris, sign = mesh.cell_tri_idx
    acc = np.zeros((mesh.n_tris, 3))
    np.add.at(acc, tris, sign[:, None] * mesh.tri_normals[tris])
    if np.abs(acc[mesh.internal_tris]).max() > 1e-15 * scale**2:
        f.append("n_qf != -n_pf")
    # planar faces: area equals the norm of the face vector
    for g in range(mesh.n_faces):
        v = mesh.vertices[mesh.face_vertices(g)]
        nrm = mesh.face_vectors[g] / mesh.face_areas[g]
        if np.abs((v - v[0]) @ nrm).max() < 1e-14 * scale:
            t = slice(mesh.tri_ptr[g], mesh.tri_ptr[g + 1])
            if abs(mesh.tri_areas[t].sum() - mesh.face_areas[g]) > 1e-12 * mesh.face_areas[g]:
                f.append("planar area")
                break
    # total volume of the generating box
    if abs(mesh.cell_volumes.sum() - np.prod(mesh.vertices.max(0) - mesh.vertices.min(0))) > 1e-12:
        f.append("volume")
    # least squares is exact for affine data; constrained gradients stay in the unit ball
    a = rng.uniform(-1, 1, 3)
    a *= rng.uniform(0.1, 0.99) / np.linalg.norm(a)
    tris = mesh.boundary_tris
    op = LeastSquaresGradient(mesh, tris)
    g = op(mesh.cell_centers @ a + 0.3, mesh.tri_centers[tris] @ a + 0.3)
    if np.abs(g - a).max() > 1e-10:
        f.append("wls exact")
    u = rng.normal(size=mesh.n_cells) * rng.uniform(1, 20)
    if np.linalg.norm(cell_gradient_wls(mesh, u), axis=1).max() > 1 + 1e-12:
        f.append("norm")
    return f


def test_criterion_07_geometry_properties():
    rng = np.random.default_rng(20240)
    failed = []
    for trial in range(100):
        shape = tuple(int(s) for s in rng.integers(2, 6, 3))
        lo = rng.uniform(-2, 0, 3)
        hi = lo + rng.uniform(0.5, 3, 3)
        mesh = perturb_mesh(box_hex_mesh(Box(tuple(lo), tuple(hi)), shape), rng.uniform(0.05, 0.3), trial)
        fails = _geometry_failures(mesh, rng)
        if fails:
            failed.append((trial, fails))
    record(7, not failed, f"100 perturbed meshes, failures: {failed or 'none'}")


# ---------------------------------------------------------------- 8
def test_criterion_08_one_ring(monkeypatch):
    calls = {"n": 0, "bad": 0}
    inner = assembly.check_one_ring

    def counted(A, mesh):
        calls["n"] += 1
        try:
            inner(A, mesh)
        except assembly.SparsityError:
            calls["bad"] += 1
            raise

    monkeypatch.setattr(assembly, "check_one_ring", counted)
    for name, shape, amp in (("EX1", 9, 0.0), ("EX1", 9, 0.25), ("EX3", (12, 12, 4), 0.2), ("EX6", 8, 0.0)):
        prob = example(name)
        mesh = make_mesh(prob.domain, shape, amp, 1, prob.gamma)
        solver = EikonalSolver(mesh, prob.gamma)
        solver.run()
        # nonzero pattern also checked independently of the helper
        A = solver.disc.matrix(0.1, solver.fluxes(solver.seeds.full_values(mesh.n_cells)))
        P = (abs(A) > 0).astype(float)
        allowed = mesh.adjacency + sp.identity(mesh.n_cells)
        extra = (P - P.multiply(allowed > 0)).count_nonzero()
        calls["bad"] += int(extra)
    ok = calls["n"] > 0 and calls["bad"] == 0
    record(8, ok, f"{calls['n']} assembled systems checked, {calls['bad']} entries outside the face 1-ring")


# ---------------------------------------------------------------- 9
def test_criterion_09_eoc_arithmetic():
    eoc = compute_eoc([2.00e-3, 5.79e-4], [9.91e-2, 5.63e-2])[0]
    record(9, abs(eoc - 2.20) <= 0.01, f"EOC from (h, E1) pairs (9.91e-2, 2.00e-3), (5.63e-2, 5.79e-4) = {eoc:.4f}")


# ---------------------------------------------------------------- 10
def test_criterion_10_reproducible_reports(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        cmd = [sys.executable, "-m", "eikonal_fv", "-q", "study", "--example", "EX9", "--levels", "12,16",
               "--repro", "--out", str(out)]
        subprocess.run(cmd, check=True, capture_output=True)
        outs.append((out / "report.csv").read_bytes())
    ok = outs[0] == outs[1]
    record(10, ok, f"two `study --repro` runs, {len(outs[0])} bytes each, identical={ok}")


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__)), "-q", "-s", "-p", "no:cacheprovider"]))
