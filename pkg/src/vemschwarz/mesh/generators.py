"""Generators for the three mesh families on the unit cube."""

import numpy as np

from ..errors import DegenerateCellError, TopologyError
from .core import mesh_from_cell_loops, merge_points

# outward loops of the unit cube, corners encoded as (dx, dy, dz)
_CUBE_LOOPS = [
    [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
    [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
    [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
    [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
    [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
]


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if int(value) != value or value < 1:
            raise ValueError(f"{name} must be a positive integer, got {value!r}")


def generate_cubic_mesh(n):
    """``n**3`` axis-aligned cubes on the unit cube.

    Vertices and cells are ordered lexicographically by ``(k, j, i)``.
    """
    _check_positive(n=n)
    n = int(n)
    r = np.arange(n + 1) / n
    z, y, x = np.meshgrid(r, r, r, indexing="ij")
    vertices = np.column_stack([x.ravel(), y.ravel(), z.ravel()])

    def vid(i, j, k):
        return i + (n + 1) * (j + (n + 1) * k)

    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                cells.append([[vid(i + a, j + b, k + c) for a, b, c in loop] for loop in _CUBE_LOOPS])
    return mesh_from_cell_loops(vertices, cells)


def _clip_polygon_2d(poly, axis, value, keep_below):
    """Clip a 2D polygon against ``x[axis] <= value`` (or ``>=``)."""
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        dp = (p[axis] - value) if keep_below else (value - p[axis])
        dq = (q[axis] - value) if keep_below else (value - q[axis])
        if dp <= 0:
            out.append(p)
        if (dp < 0 < dq) or (dq < 0 < dp):
            t = dp / (dp - dq)
            out.append(p + t * (q - p))
    return out


def _polygon_area(poly):
    x, y = np.asarray(poly).T
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def hexagon_tiling(n_hex):
    """Flat-top hexagonal tiling of the unit square clipped to the square.

    Column centres sit at ``x = i / n_hex`` for ``i = 0..n_hex``; rows are
    spaced so that an integer number fits the unit height, which stretches the
    hexagons vertically by at most a few percent. Returns ``(points, polygons)``
    with counter-clockwise polygons indexing into ``points``.
    """
    _check_positive(n_hex=n_hex)
    dx = 1.0 / n_hex
    s = dx / 1.5
    n_rows = max(1, int(round(1.0 / (np.sqrt(3.0) * s))))
    dy = 1.0 / n_rows
    angles = np.arange(6) * np.pi / 3.0
    offsets = np.column_stack([s * np.cos(angles), 0.5 * dy * np.sign(np.round(np.sin(angles), 12))])
    polys = []
    for i in range(n_hex + 1):
        shift = 0.5 * dy if i % 2 else 0.0
        for j in range(-1, n_rows + 2):
            centre = np.array([i * dx, j * dy + shift])
            poly = list(centre + offsets)
            for axis in (0, 1):
                poly = _clip_polygon_2d(poly, axis, 0.0, keep_below=False)
                if len(poly) < 3:
                    break
                poly = _clip_polygon_2d(poly, axis, 1.0, keep_below=True)
                if len(poly) < 3:
                    break
            if len(poly) >= 3 and _polygon_area(poly) > 1e-3 * dx * dy:
                polys.append(np.array(poly))
    pts = np.concatenate(polys)
    uniq, inv = merge_points(pts, 1e-10 * dx)
    loops, start = [], 0
    for p in polys:
        ids = inv[start : start + len(p)]
        start += len(p)
        # drop consecutive duplicates produced by clipping through a vertex
        ids = [int(v) for k, v in enumerate(ids) if v != ids[k - 1]]
        loops.append(ids)
    return uniq, loops


def _insert_hanging(loops, points):
    """Insert vertices lying on polygon edges so that neighbouring polygons conform."""
    out = []
    for loop in loops:
        new = []
        for k, a in enumerate(loop):
            b = loop[(k + 1) % len(loop)]
            new.append(a)
            pa, pb = points[a], points[b]
            d = pb - pa
            L2 = float(d @ d)
            t = (points - pa) @ d / L2
            dist = np.linalg.norm(points - pa - np.outer(t, d), axis=1)
            on = np.flatnonzero((t > 1e-9) & (t < 1 - 1e-9) & (dist < 1e-9 * np.sqrt(L2)))
            new.extend(int(v) for v in on[np.argsort(t[on])])
        out.append(new)
    return out


def generate_hexprism_mesh(n_hex, n_layers):
    """Hexagonal prisms: a clipped hexagonal tiling of the unit square extruded in z."""
    _check_positive(n_hex=n_hex, n_layers=n_layers)
    pts2, loops = hexagon_tiling(n_hex)
    loops = _insert_hanging(loops, pts2)
    nv2 = len(pts2)
    zs = np.arange(n_layers + 1) / n_layers
    vertices = np.column_stack(
        [np.tile(pts2[:, 0], n_layers + 1), np.tile(pts2[:, 1], n_layers + 1), np.repeat(zs, nv2)]
    )
    cells = []
    for layer in range(n_layers):
        lo, hi = layer * nv2, (layer + 1) * nv2
        for loop in loops:
            faces = [[lo + v for v in loop[::-1]], [hi + v for v in loop]]
            m = len(loop)
            for k in range(m):
                a, b = loop[k], loop[(k + 1) % m]
                faces.append([lo + a, lo + b, hi + b, hi + a])
            cells.append(faces)
    return mesh_from_cell_loops(vertices, cells)


# ---------------------------------------------------------------------------
# Voronoi


_BOX_PLANES = [
    (np.array([-1.0, 0.0, 0.0]), 0.0),
    (np.array([1.0, 0.0, 0.0]), 1.0),
    (np.array([0.0, -1.0, 0.0]), 0.0),
    (np.array([0.0, 1.0, 0.0]), 1.0),
    (np.array([0.0, 0.0, -1.0]), 0.0),
    (np.array([0.0, 0.0, 1.0]), 1.0),
]


def _unit_box():
    c = np.array([[a, b, d] for a, b, d in np.ndindex(2, 2, 2)], dtype=float)

    def idx(a, b, d):
        return 4 * a + 2 * b + d

    loops = [[idx(*p) for p in loop] for loop in _CUBE_LOOPS]
    return [c[lp] for lp in loops], [-1 - k for k in range(6)]


def _order_cap(points, normal):
    centre = points.mean(axis=0)
    e1 = points[np.argmax(np.linalg.norm(points - centre, axis=1))] - centre
    e1 -= normal * (e1 @ normal)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    rel = points - centre
    ang = np.arctan2(rel @ e2, rel @ e1)
    return points[np.argsort(ang, kind="stable")]


def _dedupe(points, tol):
    keep = []
    for p in points:
        if all(np.abs(p - q).max() > tol for q in keep):
            keep.append(p)
    return np.array(keep)


def clip_convex_cell(faces, tags, normal, offset, tag, eps=1e-12):
    """Clip a convex polyhedron to the half-space ``x . normal <= offset``.

    ``faces`` are outward-oriented (k, 3) point arrays with matching ``tags``.
    Returns the new ``(faces, tags)``; the cut adds one cap face tagged ``tag``.
    """
    new_faces, new_tags, cap = [], [], []
    for poly, t in zip(faces, tags):
        d = poly @ normal - offset
        if np.all(d <= eps):
            new_faces.append(poly)
            new_tags.append(t)
            cap.extend(poly[np.abs(d) <= eps])
            continue
        if np.all(d >= -eps):
            cap.extend(poly[np.abs(d) <= eps])
            continue
        out = []
        m = len(poly)
        for i in range(m):
            j = (i + 1) % m
            di, dj = d[i], d[j]
            if di <= eps:
                out.append(poly[i])
                if di >= -eps:
                    cap.append(poly[i])
            if (di < -eps and dj > eps) or (di > eps and dj < -eps):
                p = poly[i] + (poly[j] - poly[i]) * (di / (di - dj))
                out.append(p)
                cap.append(p)
        if len(out) >= 3:
            new_faces.append(np.array(out))
            new_tags.append(t)
    if len(cap) >= 3:
        cap = _dedupe(np.array(cap), 10 * eps)
        if len(cap) >= 3:
            new_faces.append(_order_cap(cap, normal))
            new_tags.append(tag)
    return new_faces, new_tags


def voronoi_seeds(n, jitter, rng_seed):
    """Jittered lattice seeds ordered lexicographically by ``(k, j, i)``."""
    r = (np.arange(n) + 0.5) / n
    z, y, x = np.meshgrid(r, r, r, indexing="ij")
    seeds = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    if jitter:
        rng = np.random.default_rng(rng_seed)
        seeds = seeds + jitter * rng.uniform(-1.0, 1.0, size=seeds.shape) / n
    return seeds


def generate_voronoi_mesh(n, jitter=0.3, rng_seed=0):
    """Voronoi mesh of ``n**3`` jittered lattice seeds clipped to the unit cube.

    Each cell starts as the unit box and is clipped by the bisector half-spaces
    of the seeds within a 2-ring lattice neighbourhood, nearest first, stopping
    once the remaining bisectors lie beyond the cell's farthest vertex.
    """
    _check_positive(n=n)
    n = int(n)
    if not 0.0 <= jitter < 0.5:
        raise ValueError("jitter must lie in [0, 0.5)")
    seeds = voronoi_seeds(n, jitter, rng_seed)
    lattice = np.array(list(np.ndindex(n, n, n)))[:, ::-1]  # (i, j, k) per seed
    offsets = np.array([o for o in np.ndindex(5, 5, 5)]) - 2
    offsets = offsets[np.any(offsets != 0, axis=1)]

    box_faces, box_tags = _unit_box()
    cell_polys = []
    for s, ijk in enumerate(lattice):
        nb = ijk + offsets
        ok = np.all((nb >= 0) & (nb < n), axis=1)
        nb = nb[ok]
        nid = nb[:, 0] + n * (nb[:, 1] + n * nb[:, 2])
        dist = np.linalg.norm(seeds[nid] - seeds[s], axis=1)
        order = np.argsort(dist, kind="stable")
        faces, tags = list(box_faces), list(box_tags)
        radius = max(np.linalg.norm(p - seeds[s], axis=1).max() for p in faces)
        for o in order:
            if 0.5 * dist[o] > radius + 1e-12:
                break
            j = int(nid[o])
            normal = seeds[j] - seeds[s]
            normal = normal / np.linalg.norm(normal)
            offset = float(normal @ (0.5 * (seeds[j] + seeds[s])))
            pts_max = max(float((p @ normal).max()) for p in faces)
            if pts_max - offset <= 1e-12:
                continue
            faces, tags = clip_convex_cell(faces, tags, normal, offset, j)
            radius = max(np.linalg.norm(p - seeds[s], axis=1).max() for p in faces)
        cell_polys.append(faces)

    counts = [len(p) for faces in cell_polys for p in faces]
    all_pts = np.concatenate([p for faces in cell_polys for p in faces])
    vertices, inv = merge_points(all_pts, 1e-10 / n)
    cells, start, k = [], 0, 0
    for faces in cell_polys:
        loops = []
        for p in faces:
            ids = inv[start : start + counts[k]]
            start += counts[k]
            k += 1
            ids = [int(v) for i, v in enumerate(ids) if v != ids[i - 1]]
            if len(set(ids)) < 3:
                continue
            loops.append(ids)
        cells.append(loops)
    _reject_slivers(vertices, cells)
    try:
        return mesh_from_cell_loops(vertices, cells)
    except TopologyError as exc:
        raise DegenerateCellError(f"Voronoi clipping produced a non-conforming mesh: {exc}") from exc


def _reject_slivers(vertices, cells, min_area=1e-14):
    for c, loops in enumerate(cells):
        for loop in loops:
            X = vertices[loop]
            c0 = X.mean(axis=0)
            a = 0.5 * np.linalg.norm(np.cross(X - c0, np.roll(X, -1, axis=0) - c0).sum(axis=0))
            if a < min_area:
                raise DegenerateCellError(f"cell {c} has a face of area {a:.3e} that vertex merging cannot remove")
