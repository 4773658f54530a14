import numpy as np
import pytest

from smoothloss.graph import (LabelSignal, SimilarityGraph,
                              build_similarity_graph, knn_mask, label_signals,
                              laplacian, pairwise_distances, smoothness)


def sort_oracle_mask(distances, k):
    """Brute-force k-NN selection: full sort per row, union symmetrize."""
    n = distances.shape[0]
    mask = np.zeros((n, n), dtype=np.uint8)
    for i in range(n):
        order = sorted((j for j in range(n) if j != i),
                       key=lambda j: (distances[i, j], j))
        for j in order[:k]:
            mask[i, j] = 1
    return np.maximum(mask, mask.T)


class TestKnnMask:
    def test_maximal_k_gives_complete_graph(self, rng):
        x = rng.normal(size=(7, 3))
        d = pairwise_distances(x)
        mask = knn_mask(d, k=6)
        expect = np.ones((7, 7), dtype=np.uint8)
        np.fill_diagonal(expect, 0)
        np.testing.assert_array_equal(mask, expect)

    def test_collinear_points(self):
        # points at 0, 1, 10 with k=1: vertex 2 selects vertex 1;
        # union symmetrization keeps edges (0,1) and (1,2) only
        x = np.array([[0.0], [1.0], [10.0]])
        mask = knn_mask(pairwise_distances(x), k=1)
        expect = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.uint8)
        np.testing.assert_array_equal(mask, expect)

    def test_against_full_sort_oracle(self, rng):
        for _ in range(20):
            x = rng.normal(size=(8, 3))
            d = pairwise_distances(x)
            for k in (1, 3, 7):
                np.testing.assert_array_equal(knn_mask(d, k),
                                              sort_oracle_mask(d, k))

    def test_tie_break_prefers_lower_index(self):
        # vertices 1 and 2 equidistant from 0: the k=1 pick must be vertex 1;
        # vertices 1 and 2 both prefer vertex 3, so the union cannot add (0,2)
        d = np.array([[0.0, 2.0, 2.0, 5.0],
                      [2.0, 0.0, 3.0, 1.0],
                      [2.0, 3.0, 0.0, 1.0],
                      [5.0, 1.0, 1.0, 0.0]])
        mask = knn_mask(d, k=1)
        assert mask[0, 1] == 1 and mask[0, 2] == 0
        assert mask[3, 1] == 1  # tie between 1 and 2 resolved low

    def test_k_out_of_range(self, rng):
        d = pairwise_distances(rng.normal(size=(4, 2)))
        for k in (0, 4):
            with pytest.raises(ValueError):
                knn_mask(d, k)

    def test_scaling_preserves_mask(self, rng):
        x = rng.normal(size=(9, 3))
        for scale in (0.1, 7.0):
            m1 = knn_mask(pairwise_distances(x), 3)
            m2 = knn_mask(pairwise_distances(scale * x), 3)
            np.testing.assert_array_equal(m1, m2)


class TestBuildSimilarityGraph:
    def test_coincident_points_weight_one(self):
        x = np.array([[1.0, 1.0], [1.0, 1.0]])
        g = build_similarity_graph(x, k=1, alpha=2.0)
        # distance is sqrt(eps) rather than exactly 0
        assert abs(g.weights[0, 1] - 1.0) < 1e-5

    def test_unit_distance_weight(self):
        x = np.array([[0.0, 0.0], [1.0, 0.0]])
        g = build_similarity_graph(x, k=1, alpha=2.0)
        assert abs(g.weights[0, 1] - np.exp(-2.0)) < 1e-9
        assert abs(g.weights[0, 1] - 0.135335) < 1e-6

    def test_against_kernel_oracle(self, rng):
        x = rng.normal(size=(10, 4))
        alpha = 1.3
        g = build_similarity_graph(x, k=3, alpha=alpha)
        d = pairwise_distances(x)
        for i in range(10):
            for j in range(10):
                if g.knn_mask[i, j]:
                    expect = np.exp(-alpha * d[i, j])
                    assert abs(g.weights[i, j] - expect) < 1e-12
                else:
                    assert g.weights[i, j] == 0.0

    def test_structural_invariants(self, rng):
        x = rng.normal(size=(12, 3))
        g = build_similarity_graph(x, k=4, alpha=2.0)
        np.testing.assert_array_equal(g.weights, g.weights.T)
        assert (np.diag(g.weights) == 0).all()
        on = g.weights[g.knn_mask.astype(bool)]
        assert ((on > 0) & (on <= 1)).all()
        degrees = g.knn_mask.sum(axis=1)
        assert (degrees >= 4).all() and (degrees <= 11).all()

    def test_alpha_validation(self, rng):
        with pytest.raises(ValueError):
            build_similarity_graph(rng.normal(size=(4, 2)), k=2, alpha=-1.0)


class TestLaplacian:
    def test_empty_graph(self):
        g = SimilarityGraph(n=3, weights=np.zeros((3, 3)),
                            knn_mask=np.zeros((3, 3), dtype=np.uint8), k=1)
        np.testing.assert_array_equal(laplacian(g), np.zeros((3, 3)))

    def test_two_vertices(self):
        w = 0.7
        g = SimilarityGraph(n=2, weights=np.array([[0.0, w], [w, 0.0]]),
                            knn_mask=np.ones((2, 2), dtype=np.uint8), k=1)
        np.testing.assert_allclose(laplacian(g), [[w, -w], [-w, w]])

    def test_rows_sum_to_zero_and_psd(self, rng):
        for _ in range(10):
            x = rng.normal(size=(9, 3))
            g = build_similarity_graph(x, k=3, alpha=2.0)
            lap = laplacian(g)
            np.testing.assert_allclose(lap @ np.ones(9), 0.0, atol=1e-12)
            eigvals = np.linalg.eigvalsh(lap)
            assert eigvals.min() >= -1e-10


class TestSmoothness:
    def test_constant_signal_is_zero(self, rng):
        g = build_similarity_graph(rng.normal(size=(8, 3)), k=3, alpha=2.0)
        assert smoothness(g, np.ones(8)) == 0.0

    def test_two_vertex_quadratic_form(self):
        # s^T L s for the single-edge graph: w * (1 - 0)^2 from the cut
        w = 0.42
        g = SimilarityGraph(n=2, weights=np.array([[0.0, w], [w, 0.0]]),
                            knn_mask=np.ones((2, 2), dtype=np.uint8), k=1)
        s = LabelSignal(class_id=0, values=np.array([1.0, 0.0]))
        value = smoothness(g, s)
        assert abs(value - w) < 1e-15
        lap = laplacian(g)
        assert abs(value - s.values @ lap @ s.values) < 1e-15

    def test_matches_double_sum_oracle(self, rng):
        for _ in range(10):
            g = build_similarity_graph(rng.normal(size=(10, 3)), k=4,
                                       alpha=1.5)
            s = rng.normal(size=10)
            double_sum = sum(g.weights[u, v] * (s[u] - s[v]) ** 2
                             for u in range(10) for v in range(10))
            assert abs(smoothness(g, s) - 0.5 * double_sum) < 1e-12
            assert abs(smoothness(g, s) - s @ laplacian(g) @ s) < 1e-10

    def test_nonnegative_on_random_signals(self, rng):
        g = build_similarity_graph(rng.normal(size=(8, 3)), k=3, alpha=2.0)
        for _ in range(20):
            assert smoothness(g, rng.normal(size=8)) >= -1e-12

    def test_length_mismatch(self, rng):
        g = build_similarity_graph(rng.normal(size=(5, 2)), k=2, alpha=2.0)
        with pytest.raises(ValueError):
            smoothness(g, np.ones(6))


class TestLabelSignals:
    def test_basic(self):
        signals = label_signals(np.array([0, 1, 0]), 2)
        np.testing.assert_array_equal(signals[0].values, [1, 0, 1])
        np.testing.assert_array_equal(signals[1].values, [0, 1, 0])

    def test_single_class_batch(self):
        signals = label_signals(np.array([1, 1, 1]), 3)
        np.testing.assert_array_equal(signals[1].values, [1, 1, 1])
        np.testing.assert_array_equal(signals[0].values, [0, 0, 0])
        np.testing.assert_array_equal(signals[2].values, [0, 0, 0])

    def test_partition_property(self, rng):
        labels = rng.integers(0, 5, size=30)
        signals = label_signals(labels, 5)
        total = sum(s.values for s in signals)
        np.testing.assert_array_equal(total, np.ones(30))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            label_signals(np.array([0, 3]), 3)


class TestCrossClassIdentity:
    def test_sum_of_smoothness_counts_each_cross_edge_twice(self, rng):
        # sum_c s_c^T L s_c = 2 * (total weight of unordered cross edges)
        for n, c in ((8, 2), (16, 3), (32, 5)):
            x = rng.normal(size=(n, 3))
            labels = rng.integers(0, c, size=n)
            g = build_similarity_graph(x, k=min(4, n - 1), alpha=2.0)
            total = sum(smoothness(g, s) for s in label_signals(labels, c))
            cross = sum(g.weights[u, v]
                        for u in range(n) for v in range(u + 1, n)
                        if labels[u] != labels[v])
            assert abs(total - 2.0 * cross) < 1e-10

    def test_zero_iff_no_cross_edge(self, rng):
        # two far clusters, k=1: graph has no cross-class edge
        x = np.vstack([rng.normal(size=(4, 2)), rng.normal(size=(4, 2)) + 100])
        labels = np.array([0] * 4 + [1] * 4)
        g = build_similarity_graph(x, k=1, alpha=2.0)
        total = sum(smoothness(g, s) for s in label_signals(labels, 2))
        assert total == 0.0
        # force a cross edge: complete graph
        g2 = build_similarity_graph(x, k=7, alpha=2.0)
        total2 = sum(smoothness(g2, s) for s in label_signals(labels, 2))
        assert total2 > 0.0
