"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Every operation records its inputs and a backward closure on the output
tensor, so each forward pass implicitly builds a fresh tape (define-by-run).
``backward`` walks that record once in reverse topological order and
accumulates gradients with += semantics, so shared subexpressions and
parameter reuse come out right.

The op set is exactly what the models and losses here need: matrix product,
row-broadcast bias, ReLU, row L2-normalization, batch normalization,
pairwise Euclidean distances, the exp(-alpha*x) kernel, masked summation and
softmax cross-entropy.  No broadcasting beyond the row bias, no GPU, no
graph rewriting.  Non-finite values produced by an overflowing forward pass
are treated as an error state by callers (the training loop aborts on them)
rather than checked per operation.
"""

import numpy as np


class Tensor:
    """Dense float64 array plus an optional gradient accumulator.

    Tensors created by operations carry the creation record used by
    ``backward``; leaf tensors (parameters, inputs) have an empty record.
    A tensor without gradient state is an immutable value; the tape implied
    by a forward pass must stay within one thread.
    """

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def backward(self):
        backward(self)


def _accumulate(t, g):
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def backward(root):
    """Populate .grad of every tensor the scalar ``root`` depends on."""
    if root.data.size != 1:
        raise ValueError(f"backward root must be scalar, got shape {root.data.shape}")
    topo = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward()


def zero_grads(tensors):
    for t in tensors:
        t.grad = None


def matmul(a, b):
    """Matrix product a @ b with the standard transposed-gradient backward."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def _back():
        _accumulate(a, out.grad @ b.data.T)
        _accumulate(b, a.data.T @ out.grad)
    out._backward = _back
    return out


def add(a, b):
    """Elementwise sum of two same-shape tensors."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data + b.data, (a, b))

    def _back():
        _accumulate(a, out.grad)
        _accumulate(b, out.grad)
    out._backward = _back
    return out


def add_row_bias(a, b):
    """Add a length-n bias vector to every row of an (m, n) tensor."""
    if a.data.ndim != 2 or b.data.ndim != 1 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"bias shape mismatch: {a.data.shape} + {b.data.shape}")
    out = Tensor(a.data + b.data[None, :], (a, b))

    def _back():
        _accumulate(a, out.grad)
        _accumulate(b, out.grad.sum(axis=0))
    out._backward = _back
    return out


def relu(a):
    """Elementwise max(0, x); the subgradient at exactly 0 is taken as 0."""
    out = Tensor(np.maximum(a.data, 0.0), (a,))

    def _back():
        _accumulate(a, out.grad * (a.data > 0.0))
    out._backward = _back
    return out


def l2_normalize_rows(a, eps=1e-12):
    """Divide each row by max(its L2 norm, eps).

    Rows with norm >= eps land exactly on the unit sphere; eps only guards
    the all-zero row.  Backward applies the full quotient rule.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    norms = np.linalg.norm(a.data, axis=1)
    denom = np.maximum(norms, eps)
    out = Tensor(a.data / denom[:, None], (a,))

    def _back():
        g = out.grad
        live = (norms >= eps)[:, None]  # below eps the denominator is constant
        dot = np.sum(a.data * g, axis=1, keepdims=True)
        _accumulate(a, g / denom[:, None] - live * a.data * dot / denom[:, None] ** 3)
    out._backward = _back
    return out


def batch_norm_rows(a, scale, shift, running_mean, running_var,
                    training, momentum=0.1, eps=1e-5):
    """Per-column batch normalization with affine scale/shift.

    In training mode normalizes with the batch mean and (biased) variance
    and updates the running statistics in place; in evaluation mode uses the
    running statistics.  ``scale`` and ``shift`` are trainable tensors,
    the running statistics are plain arrays.
    """
    x = a.data
    if training:
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mu = running_mean
        var = running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    out = Tensor(xhat * scale.data + shift.data, (a, scale, shift))

    if training:
        def _back():
            g = out.grad
            m = x.shape[0]
            _accumulate(shift, g.sum(axis=0))
            _accumulate(scale, (g * xhat).sum(axis=0))
            gx = g * scale.data
            _accumulate(a, inv_std * (gx - gx.mean(axis=0)
                                      - xhat * (gx * xhat).sum(axis=0) / m))
    else:
        def _back():
            g = out.grad
            _accumulate(shift, g.sum(axis=0))
            _accumulate(scale, (g * xhat).sum(axis=0))
            _accumulate(a, g * scale.data * inv_std)
    out._backward = _back
    return out


def pairwise_euclidean(a, eps=1e-12):
    """All-pairs distances D[i, j] = sqrt(||a_i - a_j||^2 + eps).

    The eps inside the sqrt removes the singularity at coincident rows, so
    the output is differentiable everywhere; the diagonal equals sqrt(eps).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    from . import backend
    sq = backend.pairwise_sq_dists(a.data)
    out = Tensor(np.sqrt(sq + eps), (a,))

    def _back():
        h = out.grad / (2.0 * out.data)
        m = h + h.T
        _accumulate(a, 2.0 * (m.sum(axis=1)[:, None] * a.data - m @ a.data))
    out._backward = _back
    return out


def exp_neg_scale(a, alpha):
    """Elementwise exp(-alpha * x)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    out = Tensor(np.exp(-alpha * a.data), (a,))

    def _back():
        _accumulate(a, out.grad * (-alpha) * out.data)
    out._backward = _back
    return out


def masked_sum(a, mask):
    """Sum of the entries of ``a`` where the binary mask is set (scalar output).

    The mask is a constant of the forward pass; gradient flows only to the
    masked entries of ``a``.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != a.data.shape:
        raise ValueError(f"mask shape {mask.shape} != tensor shape {a.data.shape}")
    out = Tensor(np.sum(a.data * mask), (a,))

    def _back():
        _accumulate(a, out.grad * mask)
    out._backward = _back
    return out


def softmax_cross_entropy(logits, labels):
    """Mean over rows of -log softmax(logits)[label], max-stabilized.

    Backward is the classic (softmax - onehot) / m.
    """
    labels = np.asarray(labels, dtype=np.int64)
    m, c = logits.data.shape
    if labels.shape != (m,):
        raise ValueError(f"expected {m} labels, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must lie in [0, {c})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    out = Tensor(np.mean(logsumexp - z[np.arange(m), labels]), (logits,))

    def _back():
        p = np.exp(z - logsumexp[:, None])
        p[np.arange(m), labels] -= 1.0
        _accumulate(logits, out.grad * p / m)
    out._backward = _back
    return out
