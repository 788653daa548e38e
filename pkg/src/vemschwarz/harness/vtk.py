"""Legacy ASCII VTK output with polyhedral cells."""

import io
import os

import numpy as np

from ..errors import IoError
from ..mesh.io import _write_atomic

VTK_POLYHEDRON = 42


def _cell_record(mesh, c):
    rec = [len(mesh.cell_faces[c])]
    for f, s in zip(mesh.cell_faces[c], mesh.cell_signs[c]):
        loop = mesh.faces[f] if s > 0 else mesh.faces[f][::-1]
        rec.append(len(loop))
        rec.extend(int(v) for v in loop)
    return rec


def _scalars(out, name, values, fmt="%.17g"):
    out.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
    np.savetxt(out, np.asarray(values, dtype=float), fmt=fmt)


def vtk_text(mesh, fields=None, cell_fields=None):
    fields = dict(fields or {})
    cell_fields = dict(cell_fields or {})
    nv, nc = mesh.n_vertices, mesh.n_cells
    for name, v in fields.items():
        if len(v) != nv:
            raise ValueError(f"field {name!r} has {len(v)} values for {nv} vertices")
    for name, v in cell_fields.items():
        if len(v) != nc:
            raise ValueError(f"cell field {name!r} has {len(v)} values for {nc} cells")
    out = io.StringIO()
    out.write("# vtk DataFile Version 3.0\npolyhedral mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n")
    out.write(f"POINTS {nv} double\n")
    np.savetxt(out, mesh.vertices, fmt="%.17g")
    records = [_cell_record(mesh, c) for c in range(nc)]
    size = sum(len(r) + 1 for r in records)
    out.write(f"CELLS {nc} {size}\n")
    for r in records:
        out.write(f"{len(r)} " + " ".join(map(str, r)) + "\n")
    out.write(f"CELL_TYPES {nc}\n")
    out.write((f"{VTK_POLYHEDRON}\n") * nc)
    if cell_fields:
        out.write(f"CELL_DATA {nc}\n")
        for name, v in cell_fields.items():
            _scalars(out, name, v)
    if fields:
        out.write(f"POINT_DATA {nv}\n")
        for name, v in fields.items():
            _scalars(out, name, v)
    return out.getvalue()


def export_vtk(mesh, fields, path, subdomain=None, rho=None):
    """Write ``mesh`` with nodal ``fields`` (name -> vertex vector) to ``path``.

    ``subdomain`` and ``rho`` are optional per-cell arrays written as
    CELL_DATA.
    """
    cell_fields = {}
    if subdomain is not None:
        cell_fields["subdomain"] = subdomain
    if rho is not None:
        cell_fields["rho"] = rho
    text = vtk_text(mesh, fields, cell_fields)
    try:
        _write_atomic(path, text)
    except OSError as exc:
        raise IoError(f"cannot write {os.fspath(path)}: {exc}") from exc
