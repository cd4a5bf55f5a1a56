import numpy as np
import pytest

from aialab.graph import (COMBINATORIAL_LAPLACIAN, NORMALIZED_ADJACENCY,
                          SparseGraph, build_knn_graph, degree_matrix,
                          gcn_operator, propagation_operator, read_edge_list,
                          write_edge_list)
from aialab.validation import DataError


class TestSparseGraph:
    def test_edges_canonicalized(self):
        g = SparseGraph(4, [(1, 0), (0, 1), (2, 3), (3, 2)])
        assert g.num_edges == 2
        assert g.edges.tolist() == [[0, 1], [2, 3]]

    def test_adjacency_symmetric_zero_diagonal(self):
        g = SparseGraph(5, [(0, 1), (1, 2), (2, 4)])
        A = g.adjacency.toarray()
        assert (A == A.T).all()
        assert (np.diag(A) == 0).all()

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError, match="self-loop"):
            SparseGraph(3, [(1, 1)])

    def test_endpoint_out_of_range(self):
        with pytest.raises(ValueError):
            SparseGraph(2, [(0, 2)])

    def test_subgraph_relabels(self):
        g = SparseGraph(5, [(0, 1), (1, 2), (3, 4)])
        sub = g.subgraph([1, 2, 3])
        assert sub.num_nodes == 3
        assert sub.edges.tolist() == [[0, 1]]

    def test_degrees(self):
        g = SparseGraph(4, [(0, 1), (0, 2), (0, 3)])
        assert g.degrees().tolist() == [3, 1, 1, 1]

    def test_equality(self):
        assert SparseGraph(3, [(0, 1)]) == SparseGraph(3, [(1, 0)])
        assert SparseGraph(3, [(0, 1)]) != SparseGraph(3, [(0, 2)])

    def test_edges_read_only(self):
        g = SparseGraph(3, [(0, 1)])
        with pytest.raises(ValueError):
            g.edges[0, 0] = 2


class TestEdgeListIO:
    def test_round_trip(self, tmp_path):
        g = SparseGraph(6, [(0, 1), (2, 5), (3, 4)])
        path = tmp_path / "edges.txt"
        write_edge_list(path, g)
        assert SparseGraph.from_edge_list_file(path, 6) == g

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("# header\n\n0 1\n\n# tail\n1 2\n")
        assert read_edge_list(path).tolist() == [[0, 1], [1, 2]]

    def test_bad_record_named(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("0 1\n0 1 2\n")
        with pytest.raises(DataError, match=r"edges\.txt:2"):
            read_edge_list(path)

    def test_unparseable_id_named(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("0 x\n")
        with pytest.raises(DataError, match=":1"):
            read_edge_list(path)


class TestDegreeMatrix:
    def test_single_edge(self):
        D = degree_matrix(SparseGraph(2, [(0, 1)])).toarray()
        assert (D == np.diag([1, 1])).all()

    def test_empty_graph(self):
        D = degree_matrix(SparseGraph(3)).toarray()
        assert (D == np.zeros((3, 3))).all()

    def test_triangle(self):
        D = degree_matrix(SparseGraph(3, [(0, 1), (1, 2), (0, 2)])).toarray()
        assert (D == np.diag([2, 2, 2])).all()


class TestPropagationOperator:
    def test_single_edge_normalized(self):
        op = propagation_operator(SparseGraph(2, [(0, 1)]), NORMALIZED_ADJACENCY)
        assert np.allclose(op.matrix.toarray(), [[0, 1], [1, 0]])

    def test_single_edge_laplacian(self):
        op = propagation_operator(SparseGraph(2, [(0, 1)]), COMBINATORIAL_LAPLACIAN)
        assert (op.matrix.toarray() == [[1, -1], [-1, 1]]).all()

    def test_path_normalized_hand_computed(self):
        # D = diag(1, 2, 1); D^{-1/2} A D^{-1/2} has 1/sqrt(2) off-diagonals
        op = propagation_operator(SparseGraph(3, [(0, 1), (1, 2)]))
        expected = np.zeros((3, 3))
        expected[0, 1] = expected[1, 0] = 1 / np.sqrt(2)
        expected[1, 2] = expected[2, 1] = 1 / np.sqrt(2)
        assert np.allclose(op.matrix.toarray(), expected, atol=1e-15)

    def test_normalized_matches_dense_formula(self, rng):
        for _ in range(5):
            n = int(rng.integers(3, 30))
            edges = [(i, j) for i in range(n) for j in range(i + 1, n)
                     if rng.random() < 0.2]
            g = SparseGraph(n, edges)
            op = propagation_operator(g)
            d = g.degrees().astype(float)
            with np.errstate(divide="ignore"):
                inv = np.where(d > 0, 1 / np.sqrt(d), 0.0)
            expected = inv[:, None] * g.adjacency.toarray() * inv[None, :]
            assert np.allclose(op.matrix.toarray(), expected, atol=1e-15)

    def test_zero_degree_row_is_zero(self):
        op = propagation_operator(SparseGraph(3, [(0, 1)]))
        assert (op.matrix.toarray()[2] == 0).all()

    def test_laplacian_rows_sum_to_zero(self, rng):
        n = 20
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)
                 if rng.random() < 0.2]
        g = SparseGraph(n, edges)
        op = propagation_operator(g, COMBINATORIAL_LAPLACIAN)
        sums = np.asarray(op.matrix.sum(axis=1)).ravel()
        assert np.abs(sums).max() <= 1e-9
        D = degree_matrix(g).toarray()
        assert (op.matrix.toarray() == D - g.adjacency.toarray()).all()

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            propagation_operator(SparseGraph(2, [(0, 1)]), "bogus")


def _spectral_radius(M, iters=200):
    rng = np.random.default_rng(0)
    v = rng.normal(size=M.shape[0])
    for _ in range(iters):
        w = M @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
    return float(np.abs(v @ (M @ v)) / (v @ v))


class TestSpectralBounds:
    def test_normalized_adjacency_radius(self, rng):
        for _ in range(5):
            n = int(rng.integers(4, 50))
            edges = [(i, j) for i in range(n) for j in range(i + 1, n)
                     if rng.random() < 0.3]
            op = propagation_operator(SparseGraph(n, edges))
            assert _spectral_radius(op.matrix) <= 1 + 1e-6

    def test_gcn_operator_radius_and_symmetry(self, rng):
        for _ in range(5):
            n = int(rng.integers(2, 50))
            edges = [(i, j) for i in range(n) for j in range(i + 1, n)
                     if rng.random() < 0.3]
            S = gcn_operator(SparseGraph(n, edges))
            dense = S.toarray()
            assert np.allclose(dense, dense.T, atol=1e-12)
            assert _spectral_radius(S) <= 1 + 1e-6


class TestGcnOperator:
    def test_isolated_node(self):
        assert gcn_operator(SparseGraph(1)).toarray().tolist() == [[1.0]]

    def test_single_edge(self):
        S = gcn_operator(SparseGraph(2, [(0, 1)])).toarray()
        assert np.allclose(S, 0.5)

    def test_triangle(self):
        S = gcn_operator(SparseGraph(3, [(0, 1), (1, 2), (0, 2)])).toarray()
        assert np.allclose(S, 1 / 3)


class TestKnnGraph:
    def test_identical_rows_tie_break(self):
        # everyone picks node 0 (lowest id); 0 picks 1; union gives two edges
        g = build_knn_graph(np.ones((3, 2)), k=1)
        assert g.edges.tolist() == [[0, 1], [0, 2]]

    def test_collinear_points(self):
        g = build_knn_graph(np.array([[0.0], [1.0], [10.0]]), k=1)
        assert g.edges.tolist() == [[0, 1], [1, 2]]

    def test_complete_graph(self, rng):
        X = rng.normal(size=(6, 3))
        g = build_knn_graph(X, k=5)
        assert g.num_edges == 15

    def test_permutation_invariance(self, rng):
        X = rng.normal(size=(12, 4))
        g = build_knn_graph(X, k=3)
        perm = rng.permutation(12)
        gp = build_knn_graph(X[perm], k=3)
        # map permuted-graph edges back through the inverse relabeling
        inv = np.empty(12, dtype=int)
        inv[np.arange(12)] = perm
        mapped = {tuple(sorted((inv[u], inv[v]))) for u, v in gp.edges}
        assert mapped == {tuple(e) for e in g.edges.tolist()}

    def test_cosine_metric(self):
        X = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
        g = build_knn_graph(X, k=1, metric="cosine")
        # rows 0 and 1 are parallel: cosine distance 0
        assert [0, 1] in g.edges.tolist()

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            build_knn_graph(np.ones((3, 2)), k=3)
        with pytest.raises(ValueError):
            build_knn_graph(np.ones((3, 2)), k=0)

    def test_non_finite_rejected(self):
        X = np.ones((4, 2))
        X[1, 0] = np.nan
        with pytest.raises(DataError):
            build_knn_graph(X, k=1)

    def test_no_self_loops_symmetric(self, rng):
        X = rng.normal(size=(20, 3))
        g = build_knn_graph(X, k=4)
        A = g.adjacency.toarray()
        assert (np.diag(A) == 0).all()
        assert (A == A.T).all()
