"""Minimal dense reverse-mode differentiation over 2-D float64 arrays.

Every value is a matrix (vectors are 1 x d rows, losses are 1 x 1), which
keeps shape reasoning trivial for the handful of operations the models
need. Gradients accumulate in a fixed topological order, so results are
bit-reproducible run to run.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Piecewise form avoids overflow in exp for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _as2d(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeMismatch(f"expected at most 2 dimensions, got shape {arr.shape}")
    return arr


def _unbroadcast(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    out = grad
    if shape[0] == 1 and out.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and out.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    if out.shape != shape:
        raise ShapeMismatch(f"cannot reduce gradient {grad.shape} to {shape}")
    return out


class Tensor:
    """A 2-D float64 array plus the bookkeeping for backpropagation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as2d(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatch(f"item() on tensor of shape {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable leaf's .grad."""
        if self.data.size != 1:
            raise ShapeMismatch("backward() must start from a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad or p._parents for p in parents):
        out._parents = parents
        out._backward = backward
        out.requires_grad = True
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def parameter(data) -> Tensor:
    """Leaf tensor with gradient tracking enabled."""
    return Tensor(data, requires_grad=True)


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def backward(grad):
        _accumulate(a, _unbroadcast(grad, a.shape))
        _accumulate(b, _unbroadcast(grad, b.shape))

    return _make(data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data

    def backward(grad):
        _accumulate(a, _unbroadcast(grad, a.shape))
        _accumulate(b, _unbroadcast(-grad, b.shape))

    return _make(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with numpy broadcasting."""
    data = a.data * b.data

    def backward(grad):
        _accumulate(a, _unbroadcast(grad * b.data, a.shape))
        _accumulate(b, _unbroadcast(grad * a.data, b.shape))

    return _make(data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    data = a.data * c

    def backward(grad):
        _accumulate(a, grad * c)

    return _make(data, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(grad):
        _accumulate(a, grad @ b.data.T)
        _accumulate(b, a.data.T @ grad)

    return _make(data, (a, b), backward)


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)

    def backward(grad):
        _accumulate(a, grad * s * (1.0 - s))

    return _make(s, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)

    def backward(grad):
        _accumulate(a, grad * (1.0 - t * t))

    return _make(t, (a,), backward)


def mean_rows(a: Tensor) -> Tensor:
    """Mean over rows: (n, d) -> (1, d)."""
    n = a.rows
    data = a.data.mean(axis=0, keepdims=True)

    def backward(grad):
        _accumulate(a, np.repeat(grad / n, n, axis=0))

    return _make(data, (a,), backward)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.rows != b.rows:
        raise ShapeMismatch(f"concat_cols {a.shape} vs {b.shape}")
    data = np.concatenate([a.data, b.data], axis=1)
    split = a.cols

    def backward(grad):
        _accumulate(a, grad[:, :split])
        _accumulate(b, grad[:, split:])

    return _make(data, (a, b), backward)


def mean_of(tensors: list[Tensor]) -> Tensor:
    """Mean of scalar tensors, accumulated in list order."""
    if not tensors:
        raise ShapeMismatch("mean_of on an empty list")
    total = tensors[0]
    for t in tensors[1:]:
        total = add(total, t)
    return scale(total, 1.0 / len(tensors))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of row logits against integer labels.

    ``logits`` is (B, C); ``labels`` holds B class indices. Returns a
    scalar tensor.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != logits.rows:
        raise ShapeMismatch(f"{logits.rows} logit rows vs {labels.shape[0]} labels")
    logp = log_softmax(logits.data)
    b = logits.rows
    picked = logp[np.arange(b), labels]
    data = np.array([[-picked.mean()]])

    def backward(grad):
        g = np.exp(logp)
        g[np.arange(b), labels] -= 1.0
        _accumulate(logits, grad[0, 0] * g / b)

    return _make(data, (logits,), backward)


def sigmoid_bce_mean(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy of a (B, 1) logit column against 0/1 targets."""
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
    if targets.shape[0] != logits.rows or logits.cols != 1:
        raise ShapeMismatch(f"bce on logits {logits.shape} vs targets {targets.shape}")
    x = logits.data
    # log(1 + exp(-|x|)) + max(x, 0) - x*y, numerically stable
    losses = np.logaddexp(0.0, -np.abs(x)) + np.maximum(x, 0.0) - x * targets
    data = np.array([[losses.mean()]])
    b = logits.rows

    def backward(grad):
        _accumulate(logits, grad[0, 0] * (_sigmoid(x) - targets) / b)

    return _make(data, (logits,), backward)


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(np.atleast_2d(logits)))
