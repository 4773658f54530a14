"""Metric-learning MLPs trained by minimizing the smoothness of class label
signals on per-mini-batch k-nearest-neighbor similarity graphs, with a
cross-entropy twin for comparison and corruption-robustness evaluation."""

__version__ = "0.1.0"

from .backend import HAVE_EXT

__all__ = ["HAVE_EXT", "__version__"]
