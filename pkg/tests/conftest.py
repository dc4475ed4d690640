import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from eikonal_fv.mesh import PolyMesh

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def lattice_mesh(nx, ny, nz, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    """
    Hex lattice built face by face, independent of the package generators.

    Allows a single cell per axis (chains and single cells).
    """
    sx, sy, sz = spacing
    dims = (nx + 1, ny + 1, nz + 1)
    vid = lambda i, j, k: (i * dims[1] + j) * dims[2] + k  # noqa: E731
    verts = [(origin[0] + i * sx, origin[1] + j * sy, origin[2] + k * sz)
             for i in range(dims[0]) for j in range(dims[1]) for k in range(dims[2])]
    cid = lambda i, j, k: (i * ny + j) * nz + k  # noqa: E731
    faces, owner, nb = [], [], []

    def add(loop, lo_cell, hi_cell, n_cells_axis, idx):
        # loop is counter-clockwise seen from +axis
        if idx == 0:
            faces.append(loop[::-1]); owner.append(hi_cell); nb.append(-1)
        elif idx == n_cells_axis:
            faces.append(loop); owner.append(lo_cell); nb.append(-1)
        else:
            faces.append(loop); owner.append(lo_cell); nb.append(hi_cell)

    for i in range(nx + 1):
        for j in range(ny):
            for k in range(nz):
                loop = [vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)]
                add(loop, cid(i - 1, j, k) if i else -1, cid(i, j, k) if i < nx else -1, nx, i)
    for i in range(nx):
        for j in range(ny + 1):
            for k in range(nz):
                loop = [vid(i, j, k), vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j, k)]
                add(loop, cid(i, j - 1, k) if j else -1, cid(i, j, k) if j < ny else -1, ny, j)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz + 1):
                loop = [vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)]
                add(loop, cid(i, j, k - 1) if k else -1, cid(i, j, k) if k < nz else -1, nz, k)
    return PolyMesh(np.array(verts), faces, owner, nb)


@pytest.fixture
def unit_cube():
    return lattice_mesh(1, 1, 1)


@pytest.fixture
def chain3():
    return lattice_mesh(3, 1, 1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
