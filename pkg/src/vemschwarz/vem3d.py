"""Lowest-order virtual elements on polyhedra.

Degrees of freedom are vertex values. Each face carries the gradient projector
onto linear polynomials in a face-local frame; each cell combines the face
moments into its own gradient projector and a stabilized local stiffness
``rho * (consistency + h_E * dofi-dofi stabilization)``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sps
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedMeshError, SingularFaceError
from .mesh.core import group_by_length


@dataclass
class FaceProjector:
    """Gradient projector of one face.

    ``matrix`` maps the face's vertex values (loop order) to the coefficients
    of the projection in the scaled monomials ``1, xi/h, eta/h`` centred at the
    face centroid; ``moments`` maps them to ``int_f u m_alpha``.
    """

    origin: np.ndarray
    axes: np.ndarray  # (2, 3), rows are the in-plane unit axes
    scale: float
    matrix: np.ndarray  # (3, n_f)
    moments: np.ndarray  # (3, n_f)
    vertex_coords: np.ndarray  # (n_f, 2), loop vertices in the face frame

    def local_coords(self, points):
        return (np.asarray(points) - self.origin) @ self.axes.T

    def monomials(self, points):
        xi = self.local_coords(points) / self.scale
        return np.column_stack([np.ones(len(xi)), xi])


@dataclass
class ElementProjector:
    """Gradient projector of one cell onto ``1, (x - x_E)/h_E, ...``."""

    vertices: np.ndarray  # global ids, sorted
    origin: np.ndarray
    scale: float
    matrix: np.ndarray  # (4, n_E)
    dof_matrix: np.ndarray  # (n_E, 4), monomials evaluated at the vertices


@dataclass
class GlobalSystem:
    """Stiffness system with the Dirichlet (boundary) vertices eliminated."""

    A: sps.csr_matrix
    b: np.ndarray
    free: np.ndarray  # vertex ids of the free dofs
    free_index: np.ndarray  # vertex id -> free dof index, -1 on the boundary
    K: sps.csr_matrix = field(repr=False)  # full stiffness over all vertices
    load: np.ndarray = field(repr=False)  # full load over all vertices
    cell_rho: np.ndarray = field(repr=False)
    dirichlet_values: np.ndarray = field(default=None, repr=False)

    @property
    def n_dofs(self):
        return self.A.shape[0]

    def export_matrix_market(self, path):
        scipy.io.mmwrite(path, self.A, symmetry="symmetric")

    def expand(self, u_free, boundary_values=None):
        """Vertex vector from free-dof values (boundary filled from ``boundary_values`` or 0)."""
        u = np.zeros(len(self.free_index)) if boundary_values is None else np.array(boundary_values, dtype=float)
        u[self.free] = u_free
        return u


# ---------------------------------------------------------------------------
# face projectors


def _face_frames(X, centroid, normal):
    e1 = X[:, 0, :] - centroid
    e1 -= normal * np.einsum("gk,gk->g", e1, normal)[:, None]
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(normal, e1)
    return e1, e2


def _face_projector_batch(X, centroid, normal, area, h):
    """Projector and moment matrices for faces ``X`` of shape (g, L, 3)."""
    g, L, _ = X.shape
    if np.any(~(area > 1e-14 * np.maximum(h, 1e-300) ** 2)) or np.any(area <= 0):
        raise SingularFaceError("face with zero area: the gradient Gram matrix is singular")
    e1, e2 = _face_frames(X, centroid, normal)
    rel = X - centroid[:, None, :]
    xi = np.einsum("gik,gk->gi", rel, e1)
    eta = np.einsum("gik,gk->gi", rel, e2)
    dxi = np.roll(xi, -1, axis=1) - xi
    deta = np.roll(eta, -1, axis=1) - eta
    # edge i runs from vertex i to i+1; outward normal times length is (deta, -dxi)
    ln = np.stack([deta, -dxi], axis=1)  # (g, 2, L)
    nodal = 0.5 * (ln + np.roll(ln, 1, axis=2))
    P = np.empty((g, 3, L))
    P[:, 1:, :] = nodal * (h / area)[:, None, None]
    m1 = xi / h[:, None]
    m2 = eta / h[:, None]
    P[:, 0, :] = 1.0 / L - m1.mean(axis=1)[:, None] * P[:, 1, :] - m2.mean(axis=1)[:, None] * P[:, 2, :]

    # monomial mass matrix by midpoint-of-edges quadrature on the fan triangles
    c0 = np.stack([xi.mean(axis=1), eta.mean(axis=1)], axis=1)[:, :, None]  # (g, 2, 1)
    pts = np.stack([xi, eta], axis=1)  # (g, 2, L)
    nxt = np.roll(pts, -1, axis=2)
    tri_area = 0.5 * ((pts[:, 0] - c0[:, 0]) * (nxt[:, 1] - c0[:, 1]) - (pts[:, 1] - c0[:, 1]) * (nxt[:, 0] - c0[:, 0]))
    H = np.zeros((g, 3, 3))
    for q in (0.5 * (pts + c0), 0.5 * (nxt + c0), 0.5 * (pts + nxt)):
        mono = np.concatenate([np.ones((g, 1, L)), q / h[:, None, None]], axis=1)  # (g, 3, L)
        H += np.einsum("gl,gal,gbl->gab", tri_area / 3.0, mono, mono)
    moments = H @ P
    axes = np.stack([e1, e2], axis=1)
    return P, moments, axes, np.stack([xi, eta], axis=-1)


def build_face_projectors(mesh):
    """All face projectors of ``mesh`` (cached on the mesh)."""
    cache = mesh.__dict__.setdefault("_vem_cache", {})
    if "face_proj" in cache:
        return cache["face_proj"]
    out = [None] * mesh.n_faces
    for _, (idx, loops) in group_by_length(mesh.faces).items():
        X = mesh.vertices[loops]
        P, M, axes, xy = _face_projector_batch(
            X, mesh.face_centroid[idx], mesh.face_normal[idx], mesh.face_area[idx], mesh.face_diameter[idx]
        )
        for k, f in enumerate(idx):
            out[f] = FaceProjector(mesh.face_centroid[f], axes[k], float(mesh.face_diameter[f]), P[k], M[k], xy[k])
    cache["face_proj"] = out
    return out


def build_face_projector(face, mesh):
    """Gradient projector of face index ``face``."""
    return build_face_projectors(mesh)[face]


def face_stiffness_2d(proj, area):
    """2D lowest-order VEM stiffness of one planar face with unit coefficient.

    Consistency plus the unscaled dofi-dofi stabilization, the scale-invariant
    choice in two dimensions.
    """
    P = proj.matrix
    L = P.shape[1]
    G = P[1:]
    cons = (area / proj.scale**2) * (G.T @ G)
    D = np.empty((L, 3))
    D[:, 0] = 1.0
    D[:, 1:] = proj.vertex_coords / proj.scale
    R = np.eye(L) - D @ P
    return cons + R.T @ R


# ---------------------------------------------------------------------------
# element projectors and stiffness


def _face_integral_matrix(mesh, face_proj):
    """Sparse (n_faces, n_vertices) with ``W @ u = int_f u`` via the face moments."""
    rows, cols, vals = [], [], []
    for f, (loop, p) in enumerate(zip(mesh.faces, face_proj)):
        rows.append(np.full(len(loop), f))
        cols.append(loop)
        vals.append(p.moments[0])
    return sps.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_faces, mesh.n_vertices),
    )


def _element_batches(mesh):
    """Element projectors grouped by vertex count: ``{n_E: (cells, verts, P, D)}``."""
    cache = mesh.__dict__.setdefault("_vem_cache", {})
    if "elem" in cache:
        return cache["elem"]
    face_proj = build_face_projectors(mesh)
    W = _face_integral_matrix(mesh, face_proj)
    cell, face, sign = mesh._incidence
    flux = []
    for k in range(3):
        Ck = sps.csr_matrix((sign * mesh.face_normal[face, k], (cell, face)), shape=(mesh.n_cells, mesh.n_faces))
        flux.append((Ck @ W).tocsr())
    out = {}
    for size, (idx, verts) in group_by_length(mesh.cell_vertices).items():
        g = len(idx)
        rows = np.repeat(idx, size)
        cols = verts.ravel()
        h = mesh.cell_diameter[idx]
        vol = mesh.cell_volume[idx]
        P = np.empty((g, 4, size))
        for k in range(3):
            P[:, k + 1, :] = np.asarray(flux[k][rows, cols]).reshape(g, size) * (h / vol)[:, None]
        D = np.empty((g, size, 4))
        D[:, :, 0] = 1.0
        D[:, :, 1:] = (mesh.vertices[verts] - mesh.cell_centroid[idx][:, None, :]) / h[:, None, None]
        P[:, 0, :] = 1.0 / size - np.einsum("gk,gki->gi", D[:, :, 1:].mean(axis=1), P[:, 1:, :])
        out[size] = (idx, verts, P, D)
    cache["elem"] = out
    return out


def build_element_projector(cell, mesh):
    """Gradient projector of cell index ``cell``."""
    for idx, verts, P, D in _element_batches(mesh).values():
        k = np.searchsorted(idx, cell)
        if k < len(idx) and idx[k] == cell:
            return ElementProjector(
                verts[k], mesh.cell_centroid[cell], float(mesh.cell_diameter[cell]), P[k], D[k]
            )
    raise IndexError(cell)


def _stiffness_from_projector(P, D, vol, h):
    """Unit-coefficient local stiffness for batched projectors (g, 4, n), (g, n, 4)."""
    n = P.shape[-1]
    G = P[:, 1:, :]
    cons = (vol / h**2)[:, None, None] * np.einsum("gki,gkj->gij", G, G)
    R = np.eye(n)[None] - D @ P
    stab = h[:, None, None] * np.einsum("gki,gkj->gij", R, R)
    return cons + stab


def build_local_stiffness(cell, mesh, rho=1.0):
    """Local stiffness ``K_E`` of one cell together with its vertex ids."""
    ep = build_element_projector(cell, mesh)
    K = _stiffness_from_projector(
        ep.matrix[None], ep.dof_matrix[None], mesh.cell_volume[[cell]], mesh.cell_diameter[[cell]]
    )[0]
    return ep.vertices, rho * K


def element_stiffness_batches(mesh):
    """Unit-coefficient local stiffness matrices grouped by vertex count (cached)."""
    cache = mesh.__dict__.setdefault("_vem_cache", {})
    if "stiff" not in cache:
        cache["stiff"] = {
            size: (idx, verts, _stiffness_from_projector(P, D, mesh.cell_volume[idx], mesh.cell_diameter[idx]))
            for size, (idx, verts, P, D) in _element_batches(mesh).items()
        }
    return cache["stiff"]


# ---------------------------------------------------------------------------
# global assembly


def cell_coefficients(mesh, rho=None, partition=None):
    """Per-cell coefficient from a scalar, a per-cell array, or per-subdomain values."""
    if rho is None:
        return np.ones(mesh.n_cells)
    rho = np.asarray(rho, dtype=float)
    if partition is not None:
        sub = partition.subdomain_of if hasattr(partition, "subdomain_of") else np.asarray(partition)
        out = rho[sub]
    elif rho.ndim == 0:
        out = np.full(mesh.n_cells, float(rho))
    else:
        out = rho
    if out.shape != (mesh.n_cells,) or np.any(~(out > 0)):
        raise ValueError("coefficient must be positive with one value per cell")
    return out


def assemble_stiffness(mesh, cell_rho, cell_order=None):
    """Full (n_vertices square) stiffness with per-cell coefficients."""
    rows, cols, vals = [], [], []
    for idx, verts, K in element_stiffness_batches(mesh).values():
        n = verts.shape[1]
        sel = slice(None)
        if cell_order is not None:
            rank = np.argsort(cell_order)[idx]
            sel = np.argsort(rank, kind="stable")
        v = verts[sel]
        rows.append(np.repeat(v, n, axis=1).ravel())
        cols.append(np.tile(v, (1, n)).ravel())
        vals.append((cell_rho[idx][sel][:, None, None] * K[sel]).ravel())
    nv = mesh.n_vertices
    K = sps.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nv, nv))
    return K.tocsr()


def load_vector(mesh, f=None):
    """``b_i = sum_{E containing i} f(x_E) |E| / n_E``; ``f`` defaults to 1."""
    fx = np.ones(mesh.n_cells) if f is None else np.asarray(f(mesh.cell_centroid), dtype=float).reshape(-1)
    counts = np.array([len(v) for v in mesh.cell_vertices])
    w = np.repeat(fx * mesh.cell_volume / counts, counts)
    return np.bincount(np.concatenate(mesh.cell_vertices), weights=w, minlength=mesh.n_vertices)


def assemble(mesh, f=None, rho=None, partition=None, dirichlet=None):
    """Assemble the global system over the free vertices.

    ``rho`` is a scalar, a per-cell array, or per-subdomain constants when
    ``partition`` is given. ``f`` is a callable on (m, 3) points (default 1).
    ``dirichlet`` optionally gives vertex values of the boundary data, which
    are lifted into the right-hand side; by default the data is zero.
    """
    cell_rho = cell_coefficients(mesh, rho, partition)
    K = assemble_stiffness(mesh, cell_rho)
    load = load_vector(mesh, f)
    bnd = mesh.boundary_vertex_flags
    free = np.flatnonzero(~bnd)
    free_index = np.full(mesh.n_vertices, -1, dtype=np.int64)
    free_index[free] = np.arange(len(free))
    A = K[free][:, free].tocsr()
    A.sort_indices()
    b = load[free].copy()
    gvals = None
    if dirichlet is not None:
        gvals = np.zeros(mesh.n_vertices)
        gvals[bnd] = np.asarray(dirichlet, dtype=float)[bnd]
        b -= K[free][:, np.flatnonzero(bnd)] @ gvals[bnd]
    if len(free) > 1:
        ncomp, _ = connected_components(A, directed=False)
        if ncomp != 1:
            raise DisconnectedMeshError(f"free-dof graph has {ncomp} components")
    return GlobalSystem(A, b, free, free_index, K, load, cell_rho, gvals)
