import numpy as np
import pytest

from vemschwarz.decomp import (
    Partition,
    classify_interface,
    export_partition,
    grow_overlap,
    import_partition,
    is_face_connected,
    partition_graph,
    partition_structured,
    vertex_sigma,
)
from vemschwarz.errors import EmptySubdomainError, SchemaError
from vemschwarz.mesh import generate_cubic_mesh, generate_hexprism_mesh, generate_voronoi_mesh


@pytest.fixture(scope="module")
def voronoi8():
    return generate_voronoi_mesh(8, 0.3, 1)


def interface_nodes(mesh, partition):
    sig = vertex_sigma(mesh, partition)
    return {v for v in range(mesh.n_vertices) if not mesh.boundary_vertex_flags[v] and len(sig[v]) >= 2}


class TestStructured:
    def test_cubes_n8_m2(self, cube8):
        p = partition_structured(cube8, 2)
        assert p.n_subdomains == 8
        assert np.all(p.sizes() == 64)
        assert is_face_connected(cube8, p).all()
        assert p.nominal_H == 0.5

    def test_box_index(self, cube8):
        p = partition_structured(cube8, 2)
        c = cube8.cell_centroid
        want = (c[:, 0] > 0.5) + 2 * (c[:, 1] > 0.5) + 4 * (c[:, 2] > 0.5)
        np.testing.assert_array_equal(p.subdomain_of, want)

    def test_voronoi_balance(self, voronoi8):
        p = partition_structured(voronoi8, 2)
        assert np.all((p.sizes() >= 0.5 * 64) & (p.sizes() <= 1.5 * 64))

    def test_empty_box(self):
        with pytest.raises(EmptySubdomainError):
            partition_structured(generate_cubic_mesh(2), 3)


class TestGraph:
    def test_single_part(self, cube4):
        p = partition_graph(cube4, 1)
        assert np.all(p.subdomain_of == 0)

    def test_cubes_n8_eight_parts(self, cube8):
        p = partition_graph(cube8, 8, rng_seed=1)
        assert np.all(np.abs(p.sizes() - 64) <= 6)
        assert is_face_connected(cube8, p).all()

    @pytest.mark.parametrize("n_parts", [2, 3, 5, 8, 13])
    def test_axioms_and_balance(self, n_parts):
        for mesh in (generate_cubic_mesh(6), generate_voronoi_mesh(5, 0.3, 2), generate_hexprism_mesh(5, 4)):
            p = partition_graph(mesh, n_parts)
            assert p.sizes().sum() == mesh.n_cells
            assert np.all(p.sizes() > 0)
            assert p.sizes().max() <= 1.10 * np.ceil(mesh.n_cells / n_parts)
            assert is_face_connected(mesh, p).all()

    def test_deterministic(self, voronoi4):
        a = partition_graph(voronoi4, 8, rng_seed=3)
        b = partition_graph(voronoi4, 8, rng_seed=3)
        np.testing.assert_array_equal(a.subdomain_of, b.subdomain_of)

    def test_too_many_parts(self):
        with pytest.raises(EmptySubdomainError):
            partition_graph(generate_cubic_mesh(1), 2)


class TestPartitionIO:
    def test_round_trip(self, tmp_path, cube4):
        p = partition_structured(cube4, 2)
        path = tmp_path / "p.json"
        export_partition(p, path)
        q = import_partition(path, cube4)
        np.testing.assert_array_equal(p.subdomain_of, q.subdomain_of)
        assert q.n_subdomains == 8

    def test_wrong_length(self, tmp_path, cube4):
        path = tmp_path / "p.json"
        path.write_text('{"subdomainOf": [0, 1]}')
        with pytest.raises(SchemaError):
            import_partition(path, cube4)

    def test_missing_key(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text('{"parts": []}')
        with pytest.raises(SchemaError):
            import_partition(path)

    def test_empty_list(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text('{"subdomainOf": []}')
        with pytest.raises(SchemaError):
            import_partition(path)


class TestOverlap:
    def test_corner_growth(self, cube8):
        p = partition_structured(cube8, 2)
        ov = grow_overlap(cube8, p, 1)
        assert len(ov.cells[0]) == 125
        for i in range(8):
            assert set(p.cells(i)) <= set(ov.cells[i])

    def test_saturation(self, cube8):
        p = partition_structured(cube8, 2)
        ov = grow_overlap(cube8, p, 4)
        n_free = int((~cube8.boundary_vertex_flags).sum())
        for i in range(8):
            assert len(ov.cells[i]) == cube8.n_cells
            np.testing.assert_array_equal(ov.interior_dofs[i], np.arange(n_free))

    def test_zero_layers_interior(self, cube8):
        p = partition_structured(cube8, 2)
        ov = grow_overlap(cube8, p, 0)
        # open interior of a 4^3 corner box: 3^3 vertices
        assert len(ov.interior_dofs[0]) == 27

    def test_monotone_voronoi(self, voronoi4):
        p = partition_graph(voronoi4, 4)
        o1, o2 = grow_overlap(voronoi4, p, 1), grow_overlap(voronoi4, p, 2)
        for i in range(4):
            assert set(o1.cells[i]) <= set(o2.cells[i])
            assert set(o1.interior_dofs[i]) <= set(o2.interior_dofs[i])
            grown = Partition(np.isin(np.arange(voronoi4.n_cells), o1.cells[i]).astype(int), 2)
            assert is_face_connected(voronoi4, grown)[1]

    def test_bad_layers(self, cube4):
        with pytest.raises(ValueError):
            grow_overlap(cube4, partition_structured(cube4, 2), -1)


class TestClassification:
    def test_cubes_n8_m2(self, cube8):
        c = classify_interface(cube8, partition_structured(cube8, 2))
        assert len(c.vertices) == 1
        np.testing.assert_allclose(cube8.vertices[c.vertices[0]], [0.5, 0.5, 0.5])
        assert len(c.edges) == 6
        assert len(c.faces) == 12

    @pytest.mark.parametrize("n, m, nv", [(12, 3, 8), (16, 4, 27)])
    def test_vertex_counts(self, n, m, nv):
        mesh = generate_cubic_mesh(n)
        assert len(classify_interface(mesh, partition_structured(mesh, m)).vertices) == nv

    def test_interior_edges_have_two_endpoints(self):
        mesh = generate_cubic_mesh(12)
        c = classify_interface(mesh, partition_structured(mesh, 3))
        for e in c.edges:
            if len(e["boundary_ends"]) == 0:
                assert len(e["endpoints"]) == 2

    @pytest.mark.parametrize(
        "make",
        [
            lambda: (generate_cubic_mesh(9), "structured", 3),
            lambda: (generate_voronoi_mesh(6, 0.3, 4), "graph", 8),
            lambda: (generate_hexprism_mesh(6, 6), "graph", 6),
        ],
    )
    def test_total_and_disjoint(self, make):
        mesh, kind, k = make()
        part = partition_structured(mesh, k) if kind == "structured" else partition_graph(mesh, k)
        c = classify_interface(mesh, part)
        nodes = interface_nodes(mesh, part)
        assert set(c.class_of) == nodes
        seen = []
        for f in c.faces:
            seen.extend(f["nodes"])
            assert all(len(c.sigma[v]) == 2 and tuple(c.sigma[v]) == tuple(f["pair"]) for v in f["nodes"])
        for e in c.edges:
            seen.extend(e["nodes"])
        seen.extend(c.vertices)
        assert len(seen) == len(set(seen)) == len(nodes)
        assert not np.any(mesh.boundary_vertex_flags[c.vertices])
        endpoints = {int(v) for e in c.edges for v in e["endpoints"]}
        assert set(int(v) for v in c.vertices) <= endpoints

    def test_two_patches_of_the_same_pair(self):
        # the middle block cuts the x = 1/2 interface of the two halves into two strips
        mesh = generate_cubic_mesh(6)
        x, y = mesh.cell_centroid[:, 0], mesh.cell_centroid[:, 1]
        sub = (x > 0.5).astype(int)
        sub[(x > 1 / 3) & (x < 2 / 3) & (y > 1 / 3) & (y < 2 / 3)] = 2
        part = Partition(sub, 3)
        assert is_face_connected(mesh, part).all()
        c = classify_interface(mesh, part)
        assert sum(1 for f in c.faces if tuple(f["pair"]) == (0, 1)) == 2

    def test_deterministic(self, voronoi4):
        p = partition_graph(voronoi4, 6)
        a, b = classify_interface(voronoi4, p), classify_interface(voronoi4, p)
        np.testing.assert_array_equal(a.vertices, b.vertices)
        assert [list(e["nodes"]) for e in a.edges] == [list(e["nodes"]) for e in b.edges]
