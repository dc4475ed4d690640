"""
Mesh and field files.

Poly-mesh format
----------------
A first line ``POLYMESH <version> ascii|binary`` followed by

* ascii: sections ``vertices N`` (``x y z``), ``faces F``
  (``owner neighbour patch k v1 .. vk``; neighbour ``-1`` on the boundary) and
  ``cells C`` (``k f1 .. fk``), all whitespace separated;
* binary: little-endian ``int64`` counts ``(N, F, C, len(face index),
  len(cell index))`` then ``float64`` vertices, ``int64`` face pointer, face
  index, owner, neighbour, patch, cell pointer and cell index arrays.

The cell records are redundant with owner/neighbour and are checked on read.

Fields are written as VTK legacy unstructured grids with polyhedral cells
and one cell-centered scalar per name.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .mesh import MeshError, PolyMesh

FORMAT_VERSION = 1
VTK_POLYHEDRON = 42
_MAGIC = "POLYMESH"


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _cell_faces(mesh: PolyMesh):
    return mesh.cell_face_ptr, mesh.cell_face_idx


def write_polymesh(mesh: PolyMesh, path, binary: bool = False):
    path = Path(path)
    cptr, cidx = _cell_faces(mesh)
    if binary:
        with open(path, "wb") as fh:
            fh.write(f"{_MAGIC} {FORMAT_VERSION} binary\n".encode())
            counts = [mesh.n_vertices, mesh.n_faces, mesh.n_cells, len(mesh.face_idx), len(cidx)]
            np.asarray(counts, dtype="<i8").tofile(fh)
            np.asarray(mesh.vertices, dtype="<f8").tofile(fh)
            for a in (mesh.face_ptr, mesh.face_idx, mesh.owner, mesh.neighbor, mesh.patch, cptr, cidx):
                np.asarray(a, dtype="<i8").tofile(fh)
        return path
    out = io.StringIO()
    out.write(f"{_MAGIC} {FORMAT_VERSION} ascii\n")
    out.write(f"vertices {mesh.n_vertices}\n")
    for v in mesh.vertices:
        out.write(" ".join(_fmt(c) for c in v) + "\n")
    out.write(f"faces {mesh.n_faces}\n")
    ptr, idx = mesh.face_ptr, mesh.face_idx
    for g in range(mesh.n_faces):
        loop = idx[ptr[g]:ptr[g + 1]]
        out.write(f"{mesh.owner[g]} {mesh.neighbor[g]} {mesh.patch[g]} {len(loop)} "
                  + " ".join(map(str, loop)) + "\n")
    out.write(f"cells {mesh.n_cells}\n")
    for p in range(mesh.n_cells):
        fs = cidx[cptr[p]:cptr[p + 1]]
        out.write(f"{len(fs)} " + " ".join(map(str, fs)) + "\n")
    path.write_text(out.getvalue())
    return path


def read_polymesh(path) -> PolyMesh:
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", "replace").split()
        if len(header) != 3 or header[0] != _MAGIC:
            raise MeshError(f"{path}: not a poly-mesh file")
        if int(header[1]) != FORMAT_VERSION:
            raise MeshError(f"{path}: unsupported poly-mesh version {header[1]}")
        if header[2] == "binary":
            nv, nf, nc, nfi, nci = np.fromfile(fh, dtype="<i8", count=5)
            verts = np.fromfile(fh, dtype="<f8", count=3 * nv).reshape(nv, 3)
            fptr = np.fromfile(fh, dtype="<i8", count=nf + 1)
            fidx = np.fromfile(fh, dtype="<i8", count=nfi)
            owner, nb, patch = (np.fromfile(fh, dtype="<i8", count=nf) for _ in range(3))
            cptr = np.fromfile(fh, dtype="<i8", count=nc + 1)
            cidx = np.fromfile(fh, dtype="<i8", count=nci)
            if len(cidx) != nci:
                raise MeshError(f"{path}: truncated file")
        elif header[2] == "ascii":
            tok = fh.read().decode("ascii").split()
            verts, fptr, fidx, owner, nb, patch, cptr, cidx = _parse_ascii(tok, path)
        else:
            raise MeshError(f"{path}: unknown encoding {header[2]!r}")
    mesh = PolyMesh(verts, (fptr, fidx), owner, nb, patch)
    mp, mi = _cell_faces(mesh)
    if len(cptr) != len(mp) or any(
            set(cidx[cptr[p]:cptr[p + 1]]) != set(mi[mp[p]:mp[p + 1]]) for p in range(mesh.n_cells)):
        raise MeshError(f"{path}: cell records disagree with face owners")
    return mesh


def _parse_ascii(tok, path):
    pos = 0

    def section(name):
        nonlocal pos
        if tok[pos] != name:
            raise MeshError(f"{path}: expected section {name!r}, found {tok[pos]!r}")
        n = int(tok[pos + 1])
        pos += 2
        return n

    nv = section("vertices")
    verts = np.array(tok[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
    pos += 3 * nv
    nf = section("faces")
    owner, nb, patch, fptr, fidx = [], [], [], [0], []
    for _ in range(nf):
        o, q, t, k = (int(x) for x in tok[pos:pos + 4])
        fidx.extend(int(x) for x in tok[pos + 4:pos + 4 + k])
        pos += 4 + k
        owner.append(o)
        nb.append(q)
        patch.append(t)
        fptr.append(len(fidx))
    nc = section("cells")
    cptr, cidx = [0], []
    for _ in range(nc):
        k = int(tok[pos])
        cidx.extend(int(x) for x in tok[pos + 1:pos + 1 + k])
        pos += 1 + k
        cptr.append(len(cidx))
    arr = lambda a: np.asarray(a, dtype=np.int64)  # noqa: E731
    return verts, arr(fptr), arr(fidx), arr(owner), arr(nb), arr(patch), arr(cptr), arr(cidx)


# ----------------------------------------------------------------------
def write_vtk(mesh: PolyMesh, path, fields: dict | None = None, title: str = "eikonal_fv"):
    """Legacy VTK unstructured grid with polyhedral cells and cell scalars."""
    fields = fields or {}
    ptr, idx = mesh.face_ptr, mesh.face_idx
    cptr, cidx = _cell_faces(mesh)
    out = io.StringIO()
    out.write("# vtk DataFile Version 4.2\n")
    out.write(title.replace("\n", " ")[:255] + "\n")
    out.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    out.write(f"POINTS {mesh.n_vertices} double\n")
    for v in mesh.vertices:
        out.write(" ".join(_fmt(c) for c in v) + "\n")
    records = []
    for p in range(mesh.n_cells):
        rec = [len(cidx[cptr[p]:cptr[p + 1]])]
        for g in cidx[cptr[p]:cptr[p + 1]]:
            loop = idx[ptr[g]:ptr[g + 1]]
            if mesh.owner[g] != p:
                loop = loop[::-1]
            rec.append(len(loop))
            rec.extend(loop.tolist())
        records.append(rec)
    size = sum(len(r) + 1 for r in records)
    out.write(f"CELLS {mesh.n_cells} {size}\n")
    for r in records:
        out.write(f"{len(r)} " + " ".join(map(str, r)) + "\n")
    out.write(f"CELL_TYPES {mesh.n_cells}\n")
    out.write(f"{VTK_POLYHEDRON}\n" * mesh.n_cells)
    if fields:
        out.write(f"CELL_DATA {mesh.n_cells}\n")
        for name, values in fields.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (mesh.n_cells,):
                raise ValueError(f"field {name!r} must have one value per cell")
            if not name or any(c.isspace() for c in name):
                raise ValueError(f"invalid field name {name!r}")
            out.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            out.write("\n".join(_fmt(x) for x in values) + "\n")
    Path(path).write_text(out.getvalue())
    return Path(path)


def export_field(mesh: PolyMesh, field, path, name: str = "u"):
    """Write one cell-centered scalar field to a VTK file."""
    return write_vtk(mesh, path, {name: field})


def read_vtk_cell_data(path) -> dict:
    """Cell scalars of a file written by :func:`write_vtk`."""
    tok = Path(path).read_text().split("\n")
    fields = {}
    i = 0
    n = None
    while i < len(tok):
        line = tok[i].split()
        if line and line[0] == "CELL_DATA":
            n = int(line[1])
        elif line and line[0] == "SCALARS":
            if n is None:
                raise ValueError("SCALARS before CELL_DATA")
            name = line[1]
            i += 2  # skip LOOKUP_TABLE
            fields[name] = np.array(tok[i:i + n], dtype=float)
            i += n
            continue
        i += 1
    return fields
