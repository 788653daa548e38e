"""Reduced coarse space: one function per subdomain vertex.

Each coarse function is the Kronecker delta on the subdomain vertices, varies
linearly along the subdomain edges it ends, solves a unit-coefficient surface
Laplace problem (2D virtual elements on the fine faces) on the subdomain faces,
and is extended discrete-harmonically into the subdomain interiors.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateEdgeError, SingularFaceSystemError
from .schwarz import factorize_spd
from .vem3d import build_face_projectors, face_stiffness_2d

log = logging.getLogger(__name__)


@dataclass
class CoarseBasis:
    """Columns of ``R0^T`` over the free dofs, one per subdomain vertex."""

    R0T: sps.csr_matrix
    vertices: np.ndarray  # mesh vertex ids of the subdomain vertices
    interface_values: sps.csr_matrix = field(repr=False)  # (n_vertices, dim), interface part only

    @property
    def dim(self):
        return len(self.vertices)

    def nodal(self, k, system):
        """Column ``k`` as a vertex vector (boundary vertices set to 0)."""
        return system.expand(self.R0T[:, k].toarray().ravel())


# ---------------------------------------------------------------------------
# edges


def edge_coarse_values(points, x0, x1):
    """Linear rule ``clamp(1 - t, 0, 1)`` with ``t`` the chord coordinate from ``x0`` to ``x1``."""
    x0 = np.asarray(x0, dtype=float)
    d = np.asarray(x1, dtype=float) - x0
    L2 = float(d @ d)
    if np.sqrt(L2) < 1e-14:
        raise DegenerateEdgeError("edge endpoints coincide")
    t = (np.atleast_2d(points) - x0) @ d / L2
    return np.clip(1.0 - t, 0.0, 1.0)


def edge_values(edge, X):
    """Values on the edge nodes for each endpoint vertex: ``{vertex: array}``.

    Two endpoints use the linear chord rule. One endpoint varies linearly
    towards the farthest boundary end, or is constant 1 when the edge never
    reaches the boundary. More than two endpoints use normalized inverse
    squared distance weights; no endpoint gives zero.
    """
    nodes, ends = edge["nodes"], edge["endpoints"]
    P = X[nodes]
    if len(ends) == 0:
        return {}
    if len(ends) == 1:
        v = int(ends[0])
        bends = edge["boundary_ends"]
        if len(bends) == 0:
            return {v: np.ones(len(nodes))}
        far = bends[np.argmax(np.linalg.norm(X[bends] - X[v], axis=1))]
        return {v: edge_coarse_values(P, X[v], X[far])}
    if len(ends) == 2:
        a, b = int(ends[0]), int(ends[1])
        va = edge_coarse_values(P, X[a], X[b])
        return {a: va, b: 1.0 - va}
    d2 = ((P[:, None, :] - X[ends][None, :, :]) ** 2).sum(-1)
    w = 1.0 / np.maximum(d2, 1e-300)
    w /= w.sum(axis=1, keepdims=True)
    return {int(v): w[:, k] for k, v in enumerate(ends)}


# ---------------------------------------------------------------------------
# faces


def interface_fine_faces(mesh, partition):
    """Interior mesh faces whose two cells lie in different subdomains."""
    fc = mesh.face_cells
    inner = np.flatnonzero(fc[:, 1] >= 0)
    sub = partition.subdomain_of
    return inner[sub[fc[inner, 0]] != sub[fc[inner, 1]]]


def surface_stiffness(mesh, faces):
    """Unit-coefficient 2D VEM stiffness assembled over the given fine faces."""
    proj = build_face_projectors(mesh)
    rows, cols, vals = [], [], []
    for f in faces:
        loop = mesh.faces[f]
        K = face_stiffness_2d(proj[f], mesh.face_area[f])
        n = len(loop)
        rows.append(np.repeat(loop, n))
        cols.append(np.tile(loop, n))
        vals.append(K.ravel())
    nv = mesh.n_vertices
    if not rows:
        return sps.csr_matrix((nv, nv))
    return sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nv, nv)
    ).tocsr()


def face_coarse_values(S, nodes, boundary_values):
    """Discrete-harmonic values on ``nodes`` of the surface operator ``S``.

    ``boundary_values`` is a vertex vector (or matrix with one column per
    function) holding the data on every node coupled to ``nodes``.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    Sn = S[nodes]
    S_ff = Sn[:, nodes]
    mask = np.ones(S.shape[0], dtype=bool)
    mask[nodes] = False
    S_fd = Sn[:, mask]
    if S_fd.nnz == 0:
        raise SingularFaceSystemError("face nodes are not coupled to any boundary data")
    g = np.asarray(boundary_values, dtype=float)[mask]
    fac = factorize_spd(S_ff)
    return fac.solve(-(S_fd @ g))


# ---------------------------------------------------------------------------
# interior extension


def harmonic_interior_extension(A, interior, boundary, boundary_values, factor=None):
    """Solve ``A_II u_I = -A_IB u_B`` for the interior values."""
    interior = np.asarray(interior, dtype=np.int64)
    A = sps.csr_matrix(A)
    A_i = A[interior]
    fac = factor if factor is not None else factorize_spd(A_i[:, interior])
    return fac.solve(-(A_i[:, boundary] @ np.asarray(boundary_values, dtype=float)))


# ---------------------------------------------------------------------------
# assembly of R0^T


def _set_columns(rows, cols, vals, nodes, values_by_col):
    for c, v in values_by_col:
        keep = v != 0
        rows.append(nodes[keep])
        cols.append(np.full(int(keep.sum()), c))
        vals.append(v[keep])


def interface_coarse_values(mesh, partition, classification, S=None):
    """Coarse functions on the interface as a sparse (n_vertices, dim) matrix."""
    X = mesh.vertices
    nv = mesh.n_vertices
    verts = classification.vertices
    col_of = {int(v): k for k, v in enumerate(verts)}
    rows, cols, vals = [np.asarray(verts)], [np.arange(len(verts))], [np.ones(len(verts))]
    for e in classification.edges:
        ev = edge_values(e, X)
        if not ev and len(e["boundary_ends"]) == 0:
            log.warning("closed subdomain edge with sigma %s gets zero coarse values", e["sigma"])
        _set_columns(rows, cols, vals, e["nodes"], [(col_of[v], val) for v, val in ev.items()])
    G = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nv, len(verts))
    ).tocsr()

    face_nodes = np.concatenate([f["nodes"] for f in classification.faces]) if classification.faces else []
    face_nodes = np.sort(np.asarray(face_nodes, dtype=np.int64))
    if len(face_nodes) == 0 or len(verts) == 0:
        return G
    if S is None:
        S = surface_stiffness(mesh, interface_fine_faces(mesh, partition))
    S_ff = S[face_nodes][:, face_nodes]
    ncomp, labels = connected_components(S_ff, directed=False)
    rows, cols, vals = [], [], []
    for k in range(ncomp):
        nodes = face_nodes[labels == k]
        Sn = S[nodes]
        coupled = np.setdiff1d(np.unique(Sn.tocoo().col), nodes)
        if len(coupled) == 0:
            raise SingularFaceSystemError(f"subdomain face containing node {nodes[0]} has no boundary")
        g = G[coupled]
        active = np.unique(g.tocoo().col)
        if len(active) == 0:
            continue
        rhs = -(Sn[:, coupled] @ g[:, active]).toarray()
        sol = factorize_spd(Sn[:, nodes]).solve(rhs)
        sol = sol.reshape(len(nodes), len(active))
        _set_columns(rows, cols, vals, nodes, [(int(c), sol[:, j]) for j, c in enumerate(active)])
    if rows:
        G = G + sps.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=G.shape
        ).tocsr()
    return G.tocsr()


def build_coarse_basis(mesh, system, partition, classification):
    """Assemble ``R0^T`` from interface values and harmonic extensions."""
    G = interface_coarse_values(mesh, partition, classification)
    dim = len(classification.vertices)
    free_index = system.free_index
    A = system.A
    sigma = classification.sigma
    sub_nodes = [[] for _ in range(partition.n_subdomains)]
    for v in system.free:
        s = sigma[v]
        if len(s) == 1:
            sub_nodes[s[0]].append(v)
    Gf = G[system.free]  # (n_free, dim)
    rows, cols, vals = [], [], []
    Gc = Gf.tocoo()
    rows.append(Gc.row)
    cols.append(Gc.col)
    vals.append(Gc.data)
    for nodes in sub_nodes:
        if not nodes or dim == 0:
            continue
        interior = free_index[np.asarray(nodes)]
        A_i = A[interior]
        coupled = np.setdiff1d(np.unique(A_i.tocoo().col), interior)
        g = Gf[coupled]
        active = np.unique(g.tocoo().col)
        if len(active) == 0:
            continue
        rhs = -(A_i[:, coupled] @ g[:, active]).toarray()
        sol = factorize_spd(A_i[:, interior]).solve(rhs).reshape(len(interior), len(active))
        _set_columns(rows, cols, vals, interior, [(int(c), sol[:, j]) for j, c in enumerate(active)])
    R0T = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(system.n_dofs, dim)
    ).tocsr()
    return CoarseBasis(R0T, classification.vertices, G)


def partition_of_unity_nodes(mesh, partition, classification):
    """Interface nodes whose face/edge component closure avoids the boundary.

    Vertices always qualify. An edge qualifies when it has an endpoint and no
    boundary end. A face qualifies when the nodes of its fine faces are free
    and every edge among them qualifies.
    """
    bnd = mesh.boundary_vertex_flags
    out = [np.asarray(classification.vertices)]
    good_edge = np.zeros(mesh.n_vertices, dtype=bool)
    edge_node = np.zeros(mesh.n_vertices, dtype=bool)
    for e in classification.edges:
        edge_node[e["nodes"]] = True
        if len(e["endpoints"]) and len(e["boundary_ends"]) == 0:
            good_edge[e["nodes"]] = True
            out.append(e["nodes"])
    faces = interface_fine_faces(mesh, partition)
    touching = [[] for _ in range(mesh.n_vertices)]
    for f in faces:
        for v in mesh.faces[f]:
            touching[v].append(f)
    for fc in classification.faces:
        closure = np.unique(np.concatenate([mesh.faces[f] for v in fc["nodes"] for f in touching[v]]))
        if np.any(bnd[closure]) or np.any(edge_node[closure] & ~good_edge[closure]):
            continue
        out.append(fc["nodes"])
    return np.unique(np.concatenate(out)) if out else np.zeros(0, dtype=np.int64)
