import numpy as np
import pytest


def central_diff(f, x, h=1e-6):
    """Central finite-difference gradient of scalar f at array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def rel_error(a, b):
    """Scale-robust relative difference of two gradient arrays.

    Two effectively-zero arrays agree (an exactly-zero analytic gradient
    meets only finite-difference noise), so the raw difference is returned
    instead of a 0/0 ratio.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    diff = np.abs(a - b).max()
    scale = max(np.abs(a).max(), np.abs(b).max())
    if scale < 1e-7:
        return diff
    return diff / scale


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
