"""Subdomain partitions, overlap growth and interface classification.

Subdomain ids are 0-based. The interface is the set of free vertices whose
incident cells belong to at least two subdomains. Each interface vertex gets
``sigma(x)``, the sorted tuple of those subdomains, and the classification
splits the interface into subdomain faces (``|sigma| = 2``), subdomain edges
and subdomain vertices (``|sigma| >= 3``).
"""

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .errors import ClassificationError, EmptySubdomainError, SchemaError

log = logging.getLogger(__name__)


@dataclass
class Partition:
    """Non-overlapping assignment of cells to subdomains ``0..n_subdomains-1``."""

    subdomain_of: np.ndarray
    n_subdomains: int
    nominal_H: float = float("nan")

    def cells(self, i):
        return np.flatnonzero(self.subdomain_of == i)

    def sizes(self):
        return np.bincount(self.subdomain_of, minlength=self.n_subdomains)


@dataclass
class OverlapSets:
    """Overlapping subdomains as cell sets plus their interior free dofs."""

    cells: list  # per subdomain: sorted cell ids of the overlapping subdomain
    interior_dofs: list  # per subdomain: free-dof indices strictly inside it
    layers: int
    nominal_delta: float


@dataclass
class InterfaceClassification:
    """Subdomain faces, edges and vertices of a partition.

    ``faces``: list of dicts ``{"pair": (i, j), "nodes": array}``.
    ``edges``: list of dicts ``{"sigma": tuple, "nodes": array, "endpoints":
    array of vertex node ids, "boundary_ends": array of boundary node ids}``;
    ``nodes`` of an edge are ordered along the chord between its endpoints when
    it has two.
    ``vertices``: array of node ids (the coarse vertices).
    ``class_of``: dict node -> ``("face", k)``, ``("edge", k)`` or ``("vertex", k)``.
    ``clusters``: vertex node -> the high-sigma component it represents; edge
    nodes adjacent to a cluster count the cluster's vertex as an endpoint.
    """

    faces: list
    edges: list
    vertices: np.ndarray
    class_of: dict
    sigma: list = field(repr=False)
    clusters: dict = field(default_factory=dict, repr=False)


# ---------------------------------------------------------------------------
# partitions


def _face_connected(mesh, cells):
    if len(cells) <= 1:
        return True
    sub = mesh.cell_face_adjacency[cells][:, cells]
    return connected_components(sub, directed=False)[0] == 1


def is_face_connected(mesh, partition):
    """Per-subdomain face-connectivity flags."""
    return np.array([_face_connected(mesh, partition.cells(i)) for i in range(partition.n_subdomains)])


def partition_structured(mesh, m):
    """Assign each cell to the box of an ``m x m x m`` grid containing its centroid.

    Centroids on a box boundary go to the lower box.
    """
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    m = int(m)
    box = np.clip(np.ceil(mesh.cell_centroid * m).astype(np.int64) - 1, 0, m - 1)
    sub = box[:, 0] + m * (box[:, 1] + m * box[:, 2])
    counts = np.bincount(sub, minlength=m**3)
    if np.any(counts == 0):
        raise EmptySubdomainError(f"{int(np.sum(counts == 0))} of {m**3} boxes received no cell")
    return Partition(sub, m**3, 1.0 / m)


def _pseudo_peripheral(adj, start):
    node, ecc = start, -1
    for _ in range(8):
        order, pred = breadth_first_order(adj, node, directed=False)
        depth = np.zeros(adj.shape[0], dtype=np.int64)
        for v in order[1:]:
            depth[v] = depth[pred[v]] + 1
        far = order[np.flatnonzero(depth[order] == depth[order].max())]
        cand = int(far.min())
        if depth[order].max() <= ecc:
            break
        ecc = depth[order].max()
        node = cand
    return node


def _refine_bisection(adj, in_a, passes=8):
    """Pairwise boundary swaps that reduce the edge cut and keep part sizes."""
    adj = adj.tocsr()
    for _ in range(passes):
        sign = np.where(in_a, 1.0, -1.0)
        same = adj.multiply(sign[:, None] * sign[None, :]).tocsr()
        # gain of moving v = (#neighbours in other part) - (#neighbours in own part)
        internal = np.asarray((same > 0).sum(axis=1)).ravel()
        external = np.asarray((same < 0).sum(axis=1)).ravel()
        gain = external - internal
        a_cand = np.flatnonzero(in_a & (external > 0))
        b_cand = np.flatnonzero(~in_a & (external > 0))
        if len(a_cand) == 0 or len(b_cand) == 0:
            break
        a_cand = a_cand[np.lexsort((a_cand, -gain[a_cand]))]
        b_cand = b_cand[np.lexsort((b_cand, -gain[b_cand]))]
        moved = np.zeros(len(in_a), dtype=bool)
        improved = False
        for a, b in zip(a_cand, b_cand):
            if moved[a] or moved[b]:
                continue
            linked = adj[a, b] != 0
            if gain[a] + gain[b] - 2 * linked <= 0:
                break
            in_a[a], in_a[b] = False, True
            moved[a] = moved[b] = True
            # neighbour gains are stale after a swap; only swap disjoint neighbourhoods
            for v in (a, b):
                moved[adj.indices[adj.indptr[v] : adj.indptr[v + 1]]] = True
            improved = True
        if not improved:
            break
    return in_a


def _bisect(adj, cells, n_parts, rng):
    """Recursively split ``cells`` into ``n_parts`` pieces; returns list of arrays."""
    if n_parts == 1:
        return [cells]
    n_left = n_parts // 2
    sub = adj[cells][:, cells].tocsr()
    size_a = int(round(len(cells) * n_left / n_parts))
    start = int(rng.integers(len(cells)))
    ncomp, labels = connected_components(sub, directed=False)
    if ncomp > 1:
        start = int(np.flatnonzero(labels == np.argmax(np.bincount(labels)))[0])
    root = _pseudo_peripheral(sub, start)
    order = breadth_first_order(sub, root, directed=False, return_predecessors=False)
    if len(order) < len(cells):
        rest = np.setdiff1d(np.arange(len(cells)), order)
        order = np.concatenate([order, rest])
    in_a = np.zeros(len(cells), dtype=bool)
    in_a[order[:size_a]] = True
    in_a = _refine_bisection(sub, in_a)
    left, right = cells[in_a], cells[~in_a]
    return _bisect(adj, left, n_left, rng) + _bisect(adj, right, n_parts - n_left, rng)


def _repair_connectivity(adj, sub, n_parts):
    """Reassign stray components of each part to the neighbour part sharing most faces."""
    for _ in range(4 * n_parts):
        changed = False
        for p in range(n_parts):
            cells = np.flatnonzero(sub == p)
            if len(cells) <= 1:
                continue
            ncomp, labels = connected_components(adj[cells][:, cells], directed=False)
            if ncomp == 1:
                continue
            keep = np.argmax(np.bincount(labels))
            for comp in range(ncomp):
                if comp == keep:
                    continue
                stray = cells[labels == comp]
                nbr = adj[stray].tocoo().col
                owners = sub[nbr]
                owners = owners[owners != p]
                if len(owners) == 0:
                    continue
                sub[stray] = np.bincount(owners, minlength=n_parts).argmax()
                changed = True
        if not changed:
            break
    return sub


def partition_graph(mesh, n_parts, rng_seed=0):
    """Recursive bisection of the cell face-adjacency graph.

    Each split seeds one side by a breadth-first sweep from a pseudo-peripheral
    cell and improves it with pairwise boundary swaps; finally stray
    components are merged into their best-connected neighbour part. A
    deterministic stand-in for METIS-style partitions.
    """
    if int(n_parts) != n_parts or n_parts < 1:
        raise EmptySubdomainError("number of parts must be a positive integer")
    n_parts = int(n_parts)
    if n_parts > mesh.n_cells:
        raise EmptySubdomainError(f"cannot split {mesh.n_cells} cells into {n_parts} parts")
    adj = mesh.cell_face_adjacency
    rng = np.random.default_rng(rng_seed)
    parts = _bisect(adj, np.arange(mesh.n_cells), n_parts, rng)
    sub = np.empty(mesh.n_cells, dtype=np.int64)
    for p, cells in enumerate(parts):
        sub[cells] = p
    sub = _repair_connectivity(adj, sub, n_parts)
    counts = np.bincount(sub, minlength=n_parts)
    if np.any(counts == 0):
        raise EmptySubdomainError("a part became empty")
    H = float(np.cbrt(1.0 / n_parts))
    return Partition(sub, n_parts, H)


def export_partition(partition, path):
    with open(path, "w") as fh:
        json.dump({"subdomainOf": [int(s) for s in partition.subdomain_of]}, fh)
        fh.write("\n")


def import_partition(path, mesh=None):
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "subdomainOf" not in data:
        raise SchemaError(f"{path}: missing 'subdomainOf'")
    sub = np.asarray(data["subdomainOf"], dtype=np.int64)
    if mesh is not None and len(sub) != mesh.n_cells:
        raise SchemaError(f"{path}: {len(sub)} entries for {mesh.n_cells} cells")
    if sub.ndim != 1 or len(sub) == 0:
        raise SchemaError(f"{path}: 'subdomainOf' must be a non-empty list")
    if sub.min() < 0:
        raise SchemaError("subdomain ids must be non-negative")
    n = int(sub.max()) + 1
    if np.any(np.bincount(sub, minlength=n) == 0):
        raise EmptySubdomainError("partition file leaves a subdomain empty")
    return Partition(sub, n, float(np.cbrt(1.0 / n)))


# ---------------------------------------------------------------------------
# overlap


def interior_free_dofs(mesh, cells, free_index):
    """Free-dof indices of vertices whose incident cells all lie in ``cells``."""
    cv = mesh.cell_vertex_matrix
    inside = np.zeros(mesh.n_cells, dtype=np.int32)
    inside[cells] = 1
    total = np.asarray(cv.sum(axis=0)).ravel()
    hit = cv.T @ inside
    verts = np.flatnonzero((hit == total) & (total > 0))
    fi = free_index[verts]
    return np.sort(fi[fi >= 0])


def grow_overlap(mesh, partition, layers, free_index=None):
    """Overlapping subdomains by ``layers`` rounds of adding every cell that touches the current set.

    Cells touching through a vertex count as neighbours, so a box of cubes
    grows by one cube width in every direction per layer.
    """
    if int(layers) != layers or layers < 0:
        raise ValueError("layers must be a non-negative integer")
    if free_index is None:
        free = ~mesh.boundary_vertex_flags
        free_index = np.full(mesh.n_vertices, -1, dtype=np.int64)
        free_index[free] = np.arange(int(free.sum()))
    adj = mesh.cell_vertex_adjacency
    cells_out, dofs_out = [], []
    for i in range(partition.n_subdomains):
        mask = partition.subdomain_of == i
        for _ in range(int(layers)):
            mask = mask | (adj @ mask.astype(np.int8) > 0)
        cells = np.flatnonzero(mask)
        cells_out.append(cells)
        dofs_out.append(interior_free_dofs(mesh, cells, free_index))
    delta = float(layers) * float(np.mean(mesh.cell_diameter)) / np.sqrt(3.0)
    return OverlapSets(cells_out, dofs_out, int(layers), delta)


# ---------------------------------------------------------------------------
# interface classification


def vertex_sigma(mesh, partition):
    """For every vertex, the sorted tuple of subdomains of its incident cells."""
    cv = mesh.cell_vertex_matrix.tocsc()
    sub = partition.subdomain_of
    out = []
    for v in range(mesh.n_vertices):
        cells = cv.indices[cv.indptr[v] : cv.indptr[v + 1]]
        out.append(tuple(np.unique(sub[cells]).tolist()))
    return out


def _components(nodes, adj):
    """Connected components of ``nodes`` under ``adj``, numbered by smallest node id."""
    nodes = np.sort(np.asarray(nodes, dtype=np.int64))
    if len(nodes) == 0:
        return []
    ncomp, labels = connected_components(adj[nodes][:, nodes], directed=False)
    comps = [nodes[labels == k] for k in range(ncomp)]
    comps.sort(key=lambda c: c[0])
    return comps


def _group_components(nodes, sigma, adj):
    by_sigma = defaultdict(list)
    for v in nodes:
        by_sigma[sigma[v]].append(v)
    comps = []
    for s in sorted(by_sigma):
        for c in _components(by_sigma[s], adj):
            comps.append((s, c))
    comps.sort(key=lambda sc: sc[1][0])
    return comps


def _neighbours(adj, nodes):
    if len(nodes) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.unique(adj[nodes].tocoo().col)


def _is_subset(a, b):
    return set(a) < set(b)


def classify_interface(mesh, partition):
    """Split the interface into subdomain faces, edges and vertices.

    Faces are the connected components of nodes with ``|sigma| = 2`` sharing the
    same pair. Nodes with ``|sigma| >= 3`` form candidate components per sigma.
    Subdomain vertices are chosen where edges end:

    * a component whose neighbouring components all have strictly smaller sigma
      contributes one vertex (its node nearest the component centroid);
    * where two components with incomparable sigma touch, one node at the
      junction becomes a vertex unless a vertex already sits there;
    * an edge left with neither an endpoint nor a boundary end gets a vertex
      at its junction with the largest neighbouring sigma.

    The remaining ``|sigma| >= 3`` nodes are regrouped into subdomain edges,
    whose endpoints are the vertices whose cluster they touch and whose
    boundary ends are adjacent boundary nodes carrying the edge's sigma.
    """
    adj = mesh.vertex_adjacency
    bnd = mesh.boundary_vertex_flags
    sigma = vertex_sigma(mesh, partition)
    size = np.array([len(s) for s in sigma])
    iface = np.flatnonzero((size >= 2) & ~bnd)
    face_nodes = iface[size[iface] == 2]
    high_nodes = iface[size[iface] >= 3]
    X = mesh.vertices

    # restrict adjacency to free nodes for component detection
    keep = ~bnd
    free_adj = adj.multiply(keep[:, None]).multiply(keep[None, :]).tocsr()

    comps = _group_components(high_nodes, sigma, free_adj)
    comp_of = {}
    for k, (_, c) in enumerate(comps):
        for v in c:
            comp_of[int(v)] = k
    nbr_comps = []
    for k, (s, c) in enumerate(comps):
        nb = {comp_of[int(v)] for v in _neighbours(free_adj, c) if int(v) in comp_of} - {k}
        nbr_comps.append(sorted(nb))

    # vertex node -> its cluster (the component it was chosen from, or itself)
    cluster = {}
    for k, (s, c) in enumerate(comps):
        nb = nbr_comps[k]
        if nb and all(_is_subset(comps[j][0], s) for j in nb):
            centre = X[c].mean(axis=0)
            d = np.linalg.norm(X[c] - centre, axis=1)
            cluster[int(c[np.lexsort((c, d))[0]])] = c
    in_cluster = np.zeros(mesh.n_vertices, dtype=bool)
    for c in cluster.values():
        in_cluster[c] = True
    for k, (s, c) in enumerate(comps):
        for j in nbr_comps[k]:
            if j <= k:
                continue
            t = comps[j][0]
            if _is_subset(s, t) or _is_subset(t, s):
                continue
            cj = comps[j][1]
            # junction nodes: nodes of either component adjacent to the other
            junction = np.concatenate([c[np.isin(c, _neighbours(free_adj, cj))], cj[np.isin(cj, _neighbours(free_adj, c))]])
            near = np.concatenate([junction, _neighbours(free_adj, junction)])
            if np.any(in_cluster[near]):
                continue
            v = int(min(junction, key=lambda u: (-size[u], u)))
            cluster[v] = np.array([v])
            in_cluster[v] = True

    def regroup():
        is_vertex = np.zeros(mesh.n_vertices, dtype=bool)
        is_vertex[list(cluster)] = True
        owner = np.full(mesh.n_vertices, -1, dtype=np.int64)
        for v in sorted(cluster):
            owner[cluster[v]] = v
        owner[list(cluster)] = list(cluster)
        edge_nodes = high_nodes[~is_vertex[high_nodes]]
        out = []
        for s, c in _group_components(edge_nodes, sigma, free_adj):
            nb = _neighbours(adj, c)
            touched = np.concatenate([c, nb])
            ends = np.unique(owner[touched][owner[touched] >= 0])
            sset = set(s)
            bends = np.array([v for v in nb if bnd[v] and sset <= set(sigma[v])], dtype=np.int64)
            out.append({"sigma": s, "nodes": c, "endpoints": ends, "boundary_ends": bends})
        return out

    # an interior edge with no endpoint ends inside a larger component: make
    # that junction a vertex so every such edge is anchored
    for _ in range(len(high_nodes) + 1):
        edges = regroup()
        stuck = [e for e in edges if len(e["endpoints"]) == 0 and len(e["boundary_ends"]) == 0]
        if not stuck:
            break
        for e in stuck:
            c = e["nodes"]
            best, key = int(c[0]), (0, 0)
            for v in c:
                nb = adj.indices[adj.indptr[v] : adj.indptr[v + 1]]
                outside = [u for u in nb if size[u] >= 3 and not bnd[u] and sigma[u] != e["sigma"]]
                if outside:
                    k = (max(size[u] for u in outside), -int(v))
                    if k > key:
                        best, key = int(v), k
            cluster[best] = np.array([best])

    vertices = np.array(sorted(cluster), dtype=np.int64)
    vertex_index = {int(v): k for k, v in enumerate(vertices)}
    for e in edges:
        ends = e["endpoints"]
        if len(ends) == 2:
            d = X[ends[1]] - X[ends[0]]
            e["nodes"] = e["nodes"][np.argsort((X[e["nodes"]] - X[ends[0]]) @ d, kind="stable")]

    faces = []
    for s, c in _group_components(face_nodes, sigma, free_adj):
        faces.append({"pair": s, "nodes": c})

    class_of = {}
    for k, fc in enumerate(faces):
        for v in fc["nodes"]:
            class_of[int(v)] = ("face", k)
    for k, e in enumerate(edges):
        for v in e["nodes"]:
            class_of[int(v)] = ("edge", k)
    for v, k in vertex_index.items():
        class_of[v] = ("vertex", k)
    missing = [int(v) for v in iface if int(v) not in class_of]
    if missing:
        raise ClassificationError(f"{len(missing)} interface nodes left unclassified, e.g. {missing[:5]}")
    return InterfaceClassification(faces, edges, vertices, class_of, sigma, cluster)
