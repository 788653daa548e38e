"""The vertex-based coarse space on a 2 x 2 x 2 box partition.

Eight boxes meet in a single subdomain vertex at the centre of the cube. Its
coarse function is 1 there, linear along the six subdomain edges, discrete
harmonic on the twelve subdomain faces and in the subdomain interiors. The
script writes it to a VTK file that ParaView opens directly.
"""

# %%
import sys

import numpy as np

from vemschwarz.coarse import build_coarse_basis
from vemschwarz.decomp import classify_interface, partition_structured
from vemschwarz.harness import export_vtk
from vemschwarz.mesh import generate_cubic_mesh
from vemschwarz.vem3d import assemble

mesh = generate_cubic_mesh(8)
part = partition_structured(mesh, 2)
system = assemble(mesh)
cls = classify_interface(mesh, part)
print(f"{len(cls.faces)} subdomain faces, {len(cls.edges)} edges, {len(cls.vertices)} vertices")

# %%
basis = build_coarse_basis(mesh, system, part, cls)
phi = basis.nodal(0, system)
print(f"phi at the centre {phi[basis.vertices[0]]:.3f}, range [{phi.min():.3f}, {phi.max():.3f}]")

# nodes on the plane z = 1/2 along the line y = 1/2
X = mesh.vertices
line = np.flatnonzero((np.abs(X[:, 1] - 0.5) < 1e-12) & (np.abs(X[:, 2] - 0.5) < 1e-12))
for v in line[np.argsort(X[line, 0])]:
    print(f"  x = {X[v, 0]:.3f}  phi = {phi[v]:.3f}")

# %%
path = sys.argv[1] if len(sys.argv) > 1 else "coarse_function.vtk"
export_vtk(mesh, {"phi": phi}, path, subdomain=part.subdomain_of)
print("wrote", path)
