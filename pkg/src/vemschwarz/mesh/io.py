"""JSON mesh import/export.

Schema::

    {
      "vertices": [[x, y, z], ...],
      "faces": [[v0, v1, ...], ...],
      "cells": [{"faces": [i, ...], "signs": [1, -1, ...]}, ...]
    }

Indices are 0-based and the signs give the outward orientation of each face
with respect to the cell. Floats are written with ``repr``, which round-trips
exactly.
"""

import json
import os
import tempfile

from ..errors import SchemaError
from .core import PolyMesh3D


def _write_atomic(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def mesh_to_json(mesh):
    def ints(a):
        return "[" + ", ".join(str(int(v)) for v in a) + "]"

    lines = ["{", '  "vertices": [']
    lines.append(",\n".join("    [" + ", ".join(repr(float(c)) for c in v) + "]" for v in mesh.vertices))
    lines.append("  ],")
    lines.append('  "faces": [')
    lines.append(",\n".join("    " + ints(f) for f in mesh.faces))
    lines.append("  ],")
    lines.append('  "cells": [')
    lines.append(
        ",\n".join(
            '    {"faces": ' + ints(f) + ', "signs": ' + ints(s) + "}"
            for f, s in zip(mesh.cell_faces, mesh.cell_signs)
        )
    )
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_mesh(mesh, path):
    _write_atomic(path, mesh_to_json(mesh))


def mesh_from_dict(data):
    for key in ("vertices", "faces", "cells"):
        if key not in data:
            raise SchemaError(f"mesh file is missing {key!r}")
    cell_faces, cell_signs = [], []
    for k, cell in enumerate(data["cells"]):
        if not isinstance(cell, dict) or "faces" not in cell or "signs" not in cell:
            raise SchemaError(f"cell {k} needs 'faces' and 'signs'")
        cell_faces.append(cell["faces"])
        cell_signs.append(cell["signs"])
    try:
        return PolyMesh3D(data["vertices"], data["faces"], cell_faces, cell_signs)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"malformed mesh data: {exc}") from exc


def import_mesh(path):
    """Read a mesh in the JSON schema; raises SchemaError or TopologyError."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top-level value must be an object")
    return mesh_from_dict(data)
