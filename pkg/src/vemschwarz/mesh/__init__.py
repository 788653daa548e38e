"""Polyhedral meshes of the unit cube: data model, generators and IO."""

from .core import PolyMesh3D, compute_geometry, is_point_inside_cell, merge_points, mesh_from_cell_loops
from .generators import generate_cubic_mesh, generate_hexprism_mesh, generate_voronoi_mesh
from .io import export_mesh, import_mesh

__all__ = [
    "PolyMesh3D",
    "compute_geometry",
    "export_mesh",
    "generate_cubic_mesh",
    "generate_hexprism_mesh",
    "generate_voronoi_mesh",
    "import_mesh",
    "is_point_inside_cell",
    "merge_points",
    "mesh_from_cell_loops",
]
