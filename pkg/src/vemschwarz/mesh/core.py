"""Polyhedral mesh data model and geometric quantities."""

from functools import cached_property

import numpy as np
import scipy.sparse as sps
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..errors import NegativeVolumeError, NonPlanarFaceError, TopologyError

PLANAR_TOL = 1e-8


def group_by_length(arrays):
    """Group a list of 1D integer arrays by length.

    Returns a dict ``length -> (indices, stacked)`` where ``stacked`` has shape
    ``(len(indices), length)``.
    """
    lengths = np.fromiter((len(a) for a in arrays), dtype=np.int64, count=len(arrays))
    groups = {}
    for size in np.unique(lengths):
        idx = np.flatnonzero(lengths == size)
        groups[int(size)] = (idx, np.array([arrays[i] for i in idx], dtype=np.int64))
    return groups


def merge_points(points, tol):
    """Merge points closer than ``tol``.

    Returns ``(unique_points, inverse)``. The representative of each cluster is
    its lowest-index member, and clusters are numbered by first occurrence, so
    the result is deterministic.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    pairs = cKDTree(points).query_pairs(tol, output_type="ndarray")
    graph = sps.coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
    )
    _, labels = connected_components(graph, directed=False)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    # renumber clusters by first occurrence
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return points[first[order]], rank[inv]


class PolyMesh3D:
    """Conforming polyhedral mesh.

    Faces are stored once as vertex loops; the loop orientation defines the face
    normal by the right-hand rule. Each cell references its faces together with
    a sign, +1 when the stored normal points out of the cell.

    Geometry (areas, normals, centroids, volumes, diameters) is computed at
    construction and the instance should be treated as immutable afterwards.
    """

    def __init__(self, vertices, faces, cell_faces, cell_signs, check=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float).reshape(-1, 3)
        self.faces = [np.asarray(f, dtype=np.int64) for f in faces]
        self.cell_faces = [np.asarray(c, dtype=np.int64) for c in cell_faces]
        self.cell_signs = [np.asarray(s, dtype=np.int64) for s in cell_signs]
        if len(self.cell_faces) != len(self.cell_signs):
            raise TopologyError("cell face and sign lists differ in length")
        for fs, ss in zip(self.cell_faces, self.cell_signs):
            if len(fs) != len(ss):
                raise TopologyError("cell face and sign lists differ in length")
        if check:
            self.check_topology()
        compute_geometry(self)

    # -- sizes -----------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_cells(self):
        return len(self.cell_faces)

    # -- incidence -------------------------------------------------------
    @cached_property
    def _incidence(self):
        counts = np.array([len(c) for c in self.cell_faces], dtype=np.int64)
        cell = np.repeat(np.arange(self.n_cells), counts)
        face = np.concatenate(self.cell_faces) if self.n_cells else np.zeros(0, int)
        sign = np.concatenate(self.cell_signs) if self.n_cells else np.zeros(0, int)
        return cell, face, sign

    @cached_property
    def face_cells(self):
        """``(n_faces, 2)`` array of incident cells; -1 marks a missing neighbour.

        Column 0 holds the cell for which the stored normal is outward.
        """
        cell, face, sign = self._incidence
        out = np.full((self.n_faces, 2), -1, dtype=np.int64)
        pos = cell[sign > 0], face[sign > 0]
        neg = cell[sign < 0], face[sign < 0]
        out[pos[1], 0] = pos[0]
        out[neg[1], 1] = neg[0]
        # boundary faces referenced only with a negative sign: move to column 0
        lone = (out[:, 0] < 0) & (out[:, 1] >= 0)
        out[lone, 0] = out[lone, 1]
        out[lone, 1] = -1
        return out

    @cached_property
    def boundary_faces(self):
        return np.flatnonzero(self.face_cells[:, 1] < 0)

    @cached_property
    def boundary_vertex_flags(self):
        flags = np.zeros(self.n_vertices, dtype=bool)
        for f in self.boundary_faces:
            flags[self.faces[f]] = True
        return flags

    @cached_property
    def cell_vertices(self):
        """Sorted unique vertex ids of every cell."""
        return [np.unique(np.concatenate([self.faces[f] for f in fs])) for fs in self.cell_faces]

    @cached_property
    def cell_vertex_matrix(self):
        """Sparse boolean ``(n_cells, n_vertices)`` incidence (CSR)."""
        rows = np.repeat(np.arange(self.n_cells), [len(v) for v in self.cell_vertices])
        cols = np.concatenate(self.cell_vertices)
        return sps.csr_matrix(
            (np.ones(len(cols), dtype=np.int8), (rows, cols)),
            shape=(self.n_cells, self.n_vertices),
        )

    @cached_property
    def edges(self):
        """Unique vertex pairs ``(i, j)`` with ``i < j``, sorted."""
        pairs = [np.column_stack([f, np.roll(f, -1)]) for f in self.faces]
        pairs = np.sort(np.concatenate(pairs), axis=1)
        return np.unique(pairs, axis=0)

    @cached_property
    def vertex_adjacency(self):
        """Symmetric CSR adjacency of vertices through mesh edges."""
        e = self.edges
        n = self.n_vertices
        a = sps.coo_matrix((np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()

    @cached_property
    def cell_face_adjacency(self):
        """Symmetric CSR adjacency of cells sharing a face."""
        fc = self.face_cells
        inner = fc[fc[:, 1] >= 0]
        n = self.n_cells
        a = sps.coo_matrix((np.ones(len(inner), dtype=np.int8), (inner[:, 0], inner[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()

    @cached_property
    def cell_vertex_adjacency(self):
        """Symmetric CSR adjacency of distinct cells sharing at least one vertex."""
        cv = self.cell_vertex_matrix.astype(np.int32)
        a = (cv @ cv.T).tocsr()
        a.setdiag(0)
        a.eliminate_zeros()
        a.data[:] = 1
        return a

    # -- checks ----------------------------------------------------------
    def check_topology(self):
        """Raise :class:`TopologyError` unless every face is shared correctly and every cell is closed."""
        if self.n_cells == 0:
            raise TopologyError("mesh has no cells")
        cell, face, sign = self._incidence
        if face.size and (face.min() < 0 or face.max() >= self.n_faces):
            raise TopologyError("cell references a nonexistent face")
        for f in self.faces:
            if len(f) < 3:
                raise TopologyError("face with fewer than 3 vertices")
            if f.min() < 0 or f.max() >= self.n_vertices:
                raise TopologyError("face references a nonexistent vertex")
        refs = np.bincount(face, minlength=self.n_faces)
        if np.any(refs == 0):
            raise TopologyError(f"{int(np.sum(refs == 0))} faces referenced by no cell")
        if np.any(refs > 2):
            raise TopologyError(f"{int(np.sum(refs > 2))} faces referenced by more than 2 cells")
        signsum = np.bincount(face, weights=sign, minlength=self.n_faces)
        if np.any((refs == 2) & (signsum != 0)):
            raise TopologyError("interior face with equal orientation signs in both cells")
        if np.any(np.abs(sign) != 1):
            raise TopologyError("orientation signs must be +1 or -1")
        # closed cells: every edge of a cell boundary appears in exactly 2 of its faces
        nv = np.int64(self.n_vertices)
        keys = []
        for c, fs in enumerate(self.cell_faces):
            for f in fs:
                loop = self.faces[f]
                e = np.sort(np.column_stack([loop, np.roll(loop, -1)]), axis=1)
                keys.append((c * nv + e[:, 0]) * nv + e[:, 1])
        _, counts = np.unique(np.concatenate(keys), return_counts=True)
        if np.any(counts != 2):
            raise TopologyError("open cell: some boundary edge is not shared by exactly 2 faces")

    def euler_characteristics(self):
        """Per-cell ``V - E + F``."""
        out = np.empty(self.n_cells, dtype=np.int64)
        for c, fs in enumerate(self.cell_faces):
            loops = [self.faces[f] for f in fs]
            n_edges = sum(len(lp) for lp in loops) // 2
            out[c] = len(self.cell_vertices[c]) - n_edges + len(loops)
        return out

    def oriented_cell_loops(self, c):
        """Vertex loops of cell ``c`` oriented with outward normals."""
        return [self.faces[f] if s > 0 else self.faces[f][::-1] for f, s in zip(self.cell_faces[c], self.cell_signs[c])]

    def __eq__(self, other):
        if not isinstance(other, PolyMesh3D):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and len(self.faces) == len(other.faces)
            and all(np.array_equal(a, b) for a, b in zip(self.faces, other.faces))
            and len(self.cell_faces) == len(other.cell_faces)
            and all(np.array_equal(a, b) for a, b in zip(self.cell_faces, other.cell_faces))
            and all(np.array_equal(a, b) for a, b in zip(self.cell_signs, other.cell_signs))
        )

    __hash__ = None

    def __repr__(self):
        return f"PolyMesh3D(vertices={self.n_vertices}, faces={self.n_faces}, cells={self.n_cells})"


def _face_geometry(X):
    """Area, unit normal, centroid, diameter and max plane deviation for faces ``X`` of shape (g, L, 3)."""
    c0 = X.mean(axis=1, keepdims=True)
    Y = np.roll(X, -1, axis=1)
    tri = 0.5 * np.cross(X - c0, Y - c0)
    avec = tri.sum(axis=1)
    area = np.linalg.norm(avec, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        normal = avec / area[:, None]
    s = np.einsum("gik,gk->gi", tri, normal)
    tc = (c0 + X + Y) / 3.0
    with np.errstate(invalid="ignore", divide="ignore"):
        centroid = np.einsum("gi,gik->gk", s, tc) / area[:, None]
    diam = np.sqrt(((X[:, :, None, :] - X[:, None, :, :]) ** 2).sum(-1)).max(axis=(1, 2))
    dev = np.abs(np.einsum("gik,gk->gi", X - centroid[:, None, :], normal)).max(axis=1)
    return area, normal, centroid, diam, dev


def compute_geometry(mesh):
    """Fill face and cell geometric quantities on ``mesh`` in place and return it.

    Face area and centroid use a fan triangulation from the loop's vertex mean.
    Cell volume and centroid use the divergence theorem over the outward faces.
    """
    V = mesh.vertices
    nf = mesh.n_faces
    mesh.face_area = np.zeros(nf)
    mesh.face_normal = np.zeros((nf, 3))
    mesh.face_centroid = np.zeros((nf, 3))
    mesh.face_diameter = np.zeros(nf)
    for _, (idx, loops) in group_by_length(mesh.faces).items():
        area, normal, centroid, diam, dev = _face_geometry(V[loops])
        bad = ~(dev <= PLANAR_TOL * diam)
        if np.any(bad):
            f = int(idx[np.argmax(bad)])
            raise NonPlanarFaceError(f"face {f} deviates from its plane by {dev[np.argmax(bad)]:.3e}")
        mesh.face_area[idx] = area
        mesh.face_normal[idx] = normal
        mesh.face_centroid[idx] = centroid
        mesh.face_diameter[idx] = diam

    cell, face, sign = mesh._incidence
    nc = mesh.n_cells
    ref = np.array([V[v].mean(axis=0) for v in mesh.cell_vertices])
    xf = mesh.face_centroid[face] - ref[cell]
    flux = sign * np.einsum("ik,ik->i", xf, mesh.face_normal[face]) * mesh.face_area[face]
    volume = np.bincount(cell, weights=flux, minlength=nc) / 3.0
    if np.any(~(volume > 0)):
        c = int(np.argmax(~(volume > 0)))
        raise NegativeVolumeError(f"cell {c} has volume {volume[c]:.3e}")

    # first moments: int_E (x_k - r_k) dV = 1/2 sum_f s n_k int_f (x_k - r_k)^2 dA
    moment = np.zeros((nc, 3))
    loops_of_inc = [mesh.faces[f] for f in face]
    for _, (inc, loops) in group_by_length(loops_of_inc).items():
        X = V[loops] - ref[cell[inc]][:, None, :]
        c0 = X.mean(axis=1, keepdims=True)
        Y = np.roll(X, -1, axis=1)
        tri_area = np.linalg.norm(np.cross(X - c0, Y - c0), axis=-1) * 0.5
        m1, m2, m3 = 0.5 * (X + c0), 0.5 * (Y + c0), 0.5 * (X + Y)
        q = (m1**2 + m2**2 + m3**2) / 3.0
        integ = np.einsum("gi,gik->gk", tri_area, q)
        contrib = 0.5 * sign[inc][:, None] * mesh.face_normal[face[inc]] * integ
        np.add.at(moment, cell[inc], contrib)
    mesh.cell_volume = volume
    mesh.cell_centroid = ref + moment / volume[:, None]

    diam = np.zeros(nc)
    for _, (idx, verts) in group_by_length(mesh.cell_vertices).items():
        X = V[verts]
        diam[idx] = np.sqrt(((X[:, :, None, :] - X[:, None, :, :]) ** 2).sum(-1)).max(axis=(1, 2))
    mesh.cell_diameter = diam
    return mesh


def mesh_from_cell_loops(vertices, cells, check=True):
    """Build a :class:`PolyMesh3D` from per-cell outward-oriented vertex loops.

    Faces are deduplicated by vertex set; the first cell to mention a face fixes
    its stored orientation, and the second must list it reversed.
    """
    key_to_face = {}
    faces = []
    cell_faces, cell_signs = [], []
    for c, loops in enumerate(cells):
        fs, ss = [], []
        for loop in loops:
            loop = [int(v) for v in loop]
            key = tuple(sorted(loop))
            f = key_to_face.get(key)
            if f is None:
                f = len(faces)
                key_to_face[key] = f
                faces.append(loop)
                fs.append(f)
                ss.append(1)
            else:
                stored = faces[f]
                k = stored.index(loop[0])
                rev = stored[k::-1] + stored[:k:-1]
                if rev != loop:
                    raise TopologyError(f"cell {c} repeats face {f} without reversing its orientation")
                fs.append(f)
                ss.append(-1)
        cell_faces.append(fs)
        cell_signs.append(ss)
    return PolyMesh3D(vertices, faces, cell_faces, cell_signs, check=check)


def is_point_inside_cell(mesh, c, x, tol=1e-12):
    """True if point ``x`` is inside the convex cell ``c`` (within ``tol``)."""
    fs, ss = mesh.cell_faces[c], mesh.cell_signs[c]
    n = mesh.face_normal[fs] * ss[:, None]
    d = np.einsum("ik,ik->i", np.asarray(x)[None, :] - mesh.face_centroid[fs], n)
    return bool(np.all(d <= tol))
