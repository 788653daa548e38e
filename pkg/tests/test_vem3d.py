import numpy as np
import pytest
import scipy.sparse.linalg as spla

from vemschwarz.errors import DisconnectedMeshError
from vemschwarz.mesh import generate_cubic_mesh, mesh_from_cell_loops
from vemschwarz.schwarz import factorize_spd
from vemschwarz.vem3d import (
    assemble,
    assemble_stiffness,
    build_element_projector,
    build_face_projector,
    build_local_stiffness,
    cell_coefficients,
    face_stiffness_2d,
    load_vector,
)


def regular_hexagon_prism(s=0.3, height=0.2):
    ang = np.arange(6) * np.pi / 3
    base = np.column_stack([s * np.cos(ang), s * np.sin(ang), np.zeros(6)])
    X = np.vstack([base, base + [0, 0, height]])
    faces = [list(range(5, -1, -1)), list(range(6, 12))]
    faces += [[k, (k + 1) % 6, 6 + (k + 1) % 6, 6 + k] for k in range(6)]
    return mesh_from_cell_loops(X, [faces])


def linear(coef):
    c0, g = coef[0], np.asarray(coef[1:])
    return lambda X: c0 + X @ g


def fan_quadrature(P, order_pts=6):
    """Dense triangle quadrature points and weights for a planar 2D polygon."""
    c = P.mean(axis=0)
    # Dunavant degree-4 rule
    bary = np.array(
        [
            [0.108103018168070, 0.445948490915965, 0.445948490915965],
            [0.445948490915965, 0.108103018168070, 0.445948490915965],
            [0.445948490915965, 0.445948490915965, 0.108103018168070],
            [0.816847572980459, 0.091576213509771, 0.091576213509771],
            [0.091576213509771, 0.816847572980459, 0.091576213509771],
            [0.091576213509771, 0.091576213509771, 0.816847572980459],
        ]
    )
    w = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
    pts, wts = [], []
    for k in range(len(P)):
        a, b = P[k], P[(k + 1) % len(P)]
        area = 0.5 * abs((a[0] - c[0]) * (b[1] - c[1]) - (a[1] - c[1]) * (b[0] - c[0]))
        pts.append(bary @ np.array([c, a, b]))
        wts.append(w * area)
    return np.concatenate(pts), np.concatenate(wts)


class TestFaceProjector:
    def test_square_face_xi(self):
        m = generate_cubic_mesh(1)
        p = build_face_projector(0, m)
        xi = p.local_coords(m.vertices[m.faces[0]])[:, 0]
        np.testing.assert_allclose(p.matrix @ xi, [0, p.scale, 0], atol=1e-12)

    def test_constant(self, voronoi4):
        for f in range(0, voronoi4.n_faces, 13):
            p = build_face_projector(f, voronoi4)
            np.testing.assert_allclose(p.matrix @ np.ones(p.matrix.shape[1]), [1, 0, 0], atol=1e-12)

    def test_reproduces_linears(self, voronoi4, rng):
        for f in range(0, voronoi4.n_faces, 11):
            p = build_face_projector(f, voronoi4)
            c = rng.standard_normal(3)
            u = p.monomials(voronoi4.vertices[voronoi4.faces[f]]) @ c
            np.testing.assert_allclose(p.matrix @ u, c, atol=1e-12)

    def test_frame_orthonormal(self, voronoi4):
        for f in range(0, voronoi4.n_faces, 17):
            a = build_face_projector(f, voronoi4).axes
            np.testing.assert_allclose(a @ a.T, np.eye(2), atol=1e-12)
            np.testing.assert_allclose(a @ voronoi4.face_normal[f], 0, atol=1e-12)

    def test_hexagon_xi_squared_vs_quadrature(self):
        m = regular_hexagon_prism(s=0.3)
        f = 1
        p = build_face_projector(f, m)
        V = p.local_coords(m.vertices[m.faces[f]])
        u = V[:, 0] ** 2
        # oracle: constant part of grad(xi^2) in L2, plus the vertex-average constant
        q, w = fan_quadrature(V)
        grad = np.array([np.sum(w * 2 * q[:, 0]), 0.0]) / w.sum()
        coef = p.matrix @ u
        np.testing.assert_allclose(coef[1:] / p.scale, grad, atol=1e-10)
        proj_at_vertices = coef[0] + V @ coef[1:] / p.scale
        assert proj_at_vertices.mean() == pytest.approx(u.mean(), abs=1e-12)
        assert coef[0] == pytest.approx(0.5 * 0.3**2, abs=1e-12)

    def test_moments_integrate_linears(self, voronoi4, rng):
        f = 5
        p = build_face_projector(f, voronoi4)
        V = p.local_coords(voronoi4.vertices[voronoi4.faces[f]])
        c = rng.standard_normal(3)
        u = c[0] + V @ c[1:]
        q, w = fan_quadrature(V)
        exact = [np.sum(w * (c[0] + q @ c[1:]) * mono) for mono in (np.ones(len(q)), q[:, 0] / p.scale, q[:, 1] / p.scale)]
        np.testing.assert_allclose(p.moments @ u, exact, rtol=1e-10, atol=1e-14)


class TestElementProjector:
    def test_unit_cube_linear(self):
        m = generate_cubic_mesh(1)
        ep = build_element_projector(0, m)
        X = m.vertices[ep.vertices]
        u = X @ [1.0, 2.0, 3.0]
        c = ep.matrix @ u
        np.testing.assert_allclose(c[1:] / ep.scale, [1, 2, 3], atol=1e-12)
        assert c[0] == pytest.approx(0.5 * 6, abs=1e-12)

    def test_constant(self, voronoi4):
        ep = build_element_projector(3, voronoi4)
        np.testing.assert_allclose(ep.matrix @ np.ones(len(ep.vertices)), [1, 0, 0, 0], atol=1e-12)

    def test_unit_cube_x_squared(self):
        m = generate_cubic_mesh(1)
        ep = build_element_projector(0, m)
        u = m.vertices[ep.vertices, 0] ** 2
        np.testing.assert_allclose((ep.matrix @ u)[1:] / ep.scale, [1, 0, 0], atol=1e-12)

    @pytest.mark.parametrize("family", ["cubes", "voronoi", "hexprism"])
    def test_reproduces_linears(self, small_meshes, family, rng):
        m = small_meshes[family]
        for c in range(0, m.n_cells, 9):
            ep = build_element_projector(c, m)
            coef = rng.standard_normal(4)
            u = ep.dof_matrix @ coef
            np.testing.assert_allclose(ep.matrix @ u, coef, atol=1e-11)


class TestLocalStiffness:
    def test_frozen_unit_cube_row(self):
        verts, K = build_local_stiffness(0, generate_cubic_mesh(1))
        np.testing.assert_array_equal(verts, np.arange(8))
        want = [1.0535254037844386, -0.3705127018922193, -0.3705127018922193, -0.0625, -0.3705127018922193,
                -0.0625, -0.0625, 0.24551270189221927]
        np.testing.assert_allclose(K[0], want, rtol=1e-13, atol=1e-15)

    def test_unit_cube_energy_of_x(self):
        m = generate_cubic_mesh(1)
        for rho in (1.0, 7.5):
            verts, K = build_local_stiffness(0, m, rho)
            u = m.vertices[verts, 0]
            assert u @ K @ u == pytest.approx(rho, rel=1e-13)

    @pytest.mark.parametrize("family", ["cubes", "voronoi", "hexprism"])
    def test_spectral_properties(self, small_meshes, family):
        m = small_meshes[family]
        for c in range(m.n_cells):
            _, K = build_local_stiffness(c, m)
            nrm = np.linalg.norm(K)
            assert np.abs(K - K.T).max() <= 1e-12 * nrm
            assert np.abs(K.sum(axis=1)).max() <= 1e-10 * nrm
            ev = np.linalg.eigvalsh(K)
            assert ev[0] >= -1e-10 * nrm
            assert np.sum(ev < 1e-8 * nrm) == 1

    @pytest.mark.parametrize("family", ["cubes", "voronoi", "hexprism"])
    def test_consistency(self, small_meshes, family, rng):
        m = small_meshes[family]
        for c in range(0, m.n_cells, 5):
            verts, K = build_local_stiffness(c, m, rho=2.0)
            gp, gq = rng.standard_normal(3), rng.standard_normal(3)
            X = m.vertices[verts]
            p, q = X @ gp + 1.0, X @ gq - 3.0
            exact = 2.0 * m.cell_volume[c] * gp @ gq
            assert p @ K @ q == pytest.approx(exact, rel=1e-10, abs=1e-13)


class TestFaceStiffness2D:
    def test_kernel_and_linear_energy(self, voronoi4):
        for f in range(0, voronoi4.n_faces, 9):
            p = build_face_projector(f, voronoi4)
            S = face_stiffness_2d(p, voronoi4.face_area[f])
            np.testing.assert_allclose(S.sum(axis=1), 0, atol=1e-12)
            u = p.vertex_coords @ [1.0, -2.0]
            assert u @ S @ u == pytest.approx(5.0 * voronoi4.face_area[f], rel=1e-10)


class TestAssembly:
    @pytest.mark.parametrize("family", ["cubes", "voronoi", "hexprism"])
    def test_patch(self, small_meshes, family):
        m = small_meshes[family]

        def u(X):
            return 1 + 2 * X[:, 0] - X[:, 1] + 0.5 * X[:, 2]

        s = assemble(m, f=lambda X: np.zeros(len(X)), dirichlet=u(m.vertices))
        x = factorize_spd(s.A).solve(s.b)
        exact = u(m.vertices[s.free])
        assert np.abs(x - exact).max() <= 1e-9 * np.abs(exact).max()

    def test_patch_cubes_xyz(self, cube4):
        u = cube4.vertices @ [1.0, 2.0, 3.0]
        s = assemble(cube4, f=lambda X: np.zeros(len(X)), dirichlet=u)
        x = spla.spsolve(s.A.tocsc(), s.b)
        np.testing.assert_allclose(x, u[s.free], rtol=1e-9)

    def test_cubic_n2_single_dof(self):
        s = assemble(generate_cubic_mesh(2))
        assert s.n_dofs == 1
        assert s.A[0, 0] > 0
        factorize_spd(s.A)

    def test_symmetric_positive_definite(self, voronoi4):
        A = assemble(voronoi4).A
        assert abs(A - A.T).max() <= 1e-14 * abs(A).max()
        assert spla.eigsh(A, k=1, sigma=0, which="LM", return_eigenvectors=False)[0] > 0

    def test_order_independence(self, voronoi4, rng):
        rho = np.ones(voronoi4.n_cells)
        A = assemble_stiffness(voronoi4, rho)
        B = assemble_stiffness(voronoi4, rho, cell_order=rng.permutation(voronoi4.n_cells))
        assert abs(A - B).max() <= 1e-13

    def test_rho_scaling(self, cube4):
        s1 = assemble(cube4, rho=1.0)
        s3 = assemble(cube4, rho=3.0)
        assert abs(3.0 * s1.A - s3.A).max() <= 1e-14 * abs(s3.A).max()
        x1 = spla.spsolve(s1.A.tocsc(), s1.b)
        x3 = spla.spsolve(s3.A.tocsc(), s1.b)
        np.testing.assert_allclose(x3, x1 / 3.0, rtol=1e-12)

    def test_load_one_sums_to_volume(self, voronoi4):
        assert load_vector(voronoi4).sum() == pytest.approx(1.0, abs=1e-12)

    def test_piecewise_rho(self, cube4):
        sub = (cube4.cell_centroid[:, 0] > 0.5).astype(int)
        rho = cell_coefficients(cube4, [1.0, 10.0], sub)
        assert set(rho) == {1.0, 10.0}
        with pytest.raises(ValueError):
            cell_coefficients(cube4, [1.0, -1.0], sub)

    def test_disconnected(self):
        # two blocks touching only along a line; every shared vertex is on the boundary
        m = generate_cubic_mesh(4)
        x, y = m.cell_centroid[:, 0] < 0.5, m.cell_centroid[:, 1] < 0.5
        cells = [m.oriented_cell_loops(c) for c in np.flatnonzero(x ^ y)]
        pieces = mesh_from_cell_loops(m.vertices, cells, check=False)
        with pytest.raises(DisconnectedMeshError):
            assemble(pieces)

    def test_matrix_market(self, tmp_path):
        s = assemble(generate_cubic_mesh(3))
        p = tmp_path / "A.mtx"
        s.export_matrix_market(p)
        assert p.read_text().startswith("%%MatrixMarket matrix coordinate real symmetric")
