"""Kernel backend selection.

Imports the compiled extension when available, otherwise the numpy
fallback.  Set SMOOTHLOSS_NO_EXT=1 to force the fallback (useful for
benchmarking and for testing both paths).
"""

import os

if os.environ.get("SMOOTHLOSS_NO_EXT"):
    from . import numpy_backend as _impl
    HAVE_EXT = False
else:
    try:
        from . import _kernels as _impl
        HAVE_EXT = True
    except ImportError:
        from . import numpy_backend as _impl
        HAVE_EXT = False

pairwise_sq_dists = _impl.pairwise_sq_dists
cross_sq_dists = _impl.cross_sq_dists
knn_edge_mask = _impl.knn_edge_mask
knn_vote = _impl.knn_vote

__all__ = ["HAVE_EXT", "pairwise_sq_dists", "cross_sq_dists",
           "knn_edge_mask", "knn_vote"]
