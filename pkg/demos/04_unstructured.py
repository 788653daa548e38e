"""Voronoi and hexagonal-prism meshes with graph partitions.

Subdomains come from recursive bisection of the cell adjacency graph, so
their interfaces are irregular. The coarse space still picks out subdomain
vertices wherever three or more subdomains meet.
"""

# %%
import numpy as np

from vemschwarz.decomp import classify_interface, partition_graph
from vemschwarz.harness import ExperimentConfig, run_experiment
from vemschwarz.mesh import generate_voronoi_mesh

mesh = generate_voronoi_mesh(8, jitter=0.3, rng_seed=2)
part = partition_graph(mesh, 8)
print("part sizes", part.sizes())
cls = classify_interface(mesh, part)
sizes = [len(e["nodes"]) for e in cls.edges]
print(f"{len(cls.faces)} faces, {len(cls.edges)} edges (median {np.median(sizes):.0f} nodes), {len(cls.vertices)} vertices")

# %%
for family, n in (("voronoi", 12), ("hexprism", 10)):
    (row,) = run_experiment(ExperimentConfig(mesh=family, n=n, partition="graph:8", layers=1))
    print(f"{family:9s} dofs {row.dofs:6d}  |V0| {row.V0:3d}  I {row.iters:3d}  kappa {row.kappa:6.2f}")
