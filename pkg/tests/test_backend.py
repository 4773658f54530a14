"""The compiled kernels and the numpy fallback must agree exactly."""

import numpy as np
import pytest

from smoothloss import backend
from smoothloss.backend import numpy_backend

ext = pytest.importorskip("smoothloss.backend._kernels",
                          reason="compiled extension not built")


def tied_inputs(rng, n, d):
    x = rng.normal(size=(n, d))
    if rng.random() < 0.5:
        x = np.round(x, 1)  # quantize to force exact distance ties
    return x


class TestKernelEquivalence:
    def test_pairwise_sq_dists(self, rng):
        for _ in range(50):
            x = tied_inputs(rng, int(rng.integers(2, 40)),
                            int(rng.integers(1, 8)))
            a = ext.pairwise_sq_dists(x)
            b = numpy_backend.pairwise_sq_dists(x)
            np.testing.assert_allclose(a, b, atol=1e-12)
            np.testing.assert_array_equal(a, a.T)
            assert (np.diag(a) == 0).all()

    def test_cross_sq_dists(self, rng):
        for _ in range(50):
            d = int(rng.integers(1, 8))
            a = tied_inputs(rng, int(rng.integers(1, 30)), d)
            b = tied_inputs(rng, int(rng.integers(1, 30)), d)
            np.testing.assert_allclose(ext.cross_sq_dists(a, b),
                                       numpy_backend.cross_sq_dists(a, b),
                                       atol=1e-12)

    def test_knn_edge_mask(self, rng):
        for _ in range(100):
            n = int(rng.integers(3, 30))
            x = tied_inputs(rng, n, int(rng.integers(1, 6)))
            d = np.sqrt(numpy_backend.pairwise_sq_dists(x))
            k = int(rng.integers(1, n))
            np.testing.assert_array_equal(ext.knn_edge_mask(d, k),
                                          numpy_backend.knn_edge_mask(d, k))

    def test_knn_vote(self, rng):
        for _ in range(100):
            m = int(rng.integers(2, 40))
            q = int(rng.integers(1, 15))
            d = int(rng.integers(1, 5))
            nc = int(rng.integers(2, 6))
            ref = tied_inputs(rng, m, d)
            queries = tied_inputs(rng, q, d)
            labels = rng.integers(0, nc, size=m)
            dists = numpy_backend.cross_sq_dists(queries, ref)
            k = int(rng.integers(1, m + 1))
            np.testing.assert_array_equal(
                ext.knn_vote(dists, labels, k, nc),
                numpy_backend.knn_vote(dists, labels, k, nc))

    def test_validation_parity(self, rng):
        d = numpy_backend.pairwise_sq_dists(rng.normal(size=(5, 2)))
        for impl in (ext, numpy_backend):
            with pytest.raises(ValueError):
                impl.knn_edge_mask(d, 0)
            with pytest.raises(ValueError):
                impl.knn_edge_mask(d, 5)
            with pytest.raises(ValueError):
                impl.knn_vote(d, np.zeros(5, dtype=np.int64), 6, 1)
            with pytest.raises(ValueError):  # label outside the class range
                impl.knn_vote(d, np.array([0, 1, 2, 3, 9]), 2, 4)


def test_backend_selected_the_extension():
    # in this build the extension should be active unless forced off
    import os
    if os.environ.get("SMOOTHLOSS_NO_EXT"):
        assert not backend.HAVE_EXT
    else:
        assert backend.HAVE_EXT
