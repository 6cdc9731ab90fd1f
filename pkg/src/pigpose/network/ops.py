"""Reverse-mode autodiff over numpy arrays, sized for small conv nets.

A forward pass builds a tape of Nodes; backward() walks it once in
reverse topological order, accumulating exact gradients. Tensors are laid
out NHWC so im2col and the GEMM outputs are plain reshapes (1x1 convs
need no column copy at all); kernels are stored (k, k, in_c, out_c).
Wrap inference in no_grad() to skip tape bookkeeping entirely.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import NetworkError

_GRAD_ENABLED = [True]


@contextmanager
def no_grad():
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


class Node:
    """One tape entry: a value, its consumers' accumulated gradient, inputs."""

    __slots__ = ("value", "grad", "parents", "backward_fn")

    def __init__(self, value, parents=(), backward_fn=None):
        self.value = value
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn


def value_of(x):
    return x.value if isinstance(x, Node) else x


def _tracking(*xs) -> bool:
    return _GRAD_ENABLED[-1] and any(isinstance(x, Node) for x in xs)


def _accum(parent, grad) -> None:
    if isinstance(parent, Node):
        parent.grad = grad if parent.grad is None else parent.grad + grad


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(N, H, W, C) -> (N*H*W, k*k*C) for stride-1 same-padding conv."""
    n, h, w, c = x.shape
    if k == 1:
        return x.reshape(n * h * w, c)
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    s = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, h, w, k, k, c),
        strides=(s[0], s[1], s[2], s[1], s[2], s[3]),
        writeable=False,
    )
    return np.ascontiguousarray(view).reshape(n * h * w, k * k * c)


def _col2im(dcols: np.ndarray, x_shape: tuple, k: int) -> np.ndarray:
    """Scatter-add the im2col gradient back to input layout."""
    n, h, w, c = x_shape
    if k == 1:
        return dcols.reshape(n, h, w, c)
    p = k // 2
    t = dcols.reshape(n, h, w, k, k, c)
    dxp = np.zeros((n, h + 2 * p, w + 2 * p, c), dtype=dcols.dtype)
    for ki in range(k):
        for kj in range(k):
            dxp[:, ki : ki + h, kj : kj + w, :] += t[:, :, :, ki, kj, :]
    return dxp[:, p : p + h, p : p + w, :]


def conv2d(x, w, b):
    """Stride-1 same-padding convolution; w is (k, k, in_c, out_c)."""
    xv, wv, bv = value_of(x), value_of(w), value_of(b)
    n, h, width, c = xv.shape
    k, k2, in_c, out_c = wv.shape
    if k != k2:
        raise NetworkError(f"non-square kernel {wv.shape}")
    if in_c != c:
        raise NetworkError(f"conv expects {in_c} input channels, got {c}")
    w_mat = wv.reshape(k * k * in_c, out_c)
    cols = _im2col(xv, k)
    y = (cols @ w_mat + bv).reshape(n, h, width, out_c)
    if not _tracking(x, w, b):
        return y

    def backward(dy):
        dy_mat = dy.reshape(n * h * width, out_c)
        if isinstance(w, Node) or isinstance(b, Node):
            _accum(w, (cols.T @ dy_mat).reshape(wv.shape))
            _accum(b, dy_mat.sum(axis=0))
        if isinstance(x, Node):
            _accum(x, _col2im(dy_mat @ w_mat.T, xv.shape, k))

    return Node(y, (x, w, b), backward)


def relu(x):
    xv = value_of(x)
    y = np.maximum(xv, 0)
    if not _tracking(x):
        return y

    def backward(dy):
        _accum(x, dy * (xv > 0))

    return Node(y, (x,), backward)


def avg_pool2(x):
    xv = value_of(x)
    n, h, w, c = xv.shape
    if h % 2 or w % 2:
        raise NetworkError(f"avg_pool2 needs even spatial dims, got {h}x{w}")
    y = xv.reshape(n, h // 2, 2, w // 2, 2, c).mean(axis=(2, 4))
    if not _tracking(x):
        return y

    def backward(dy):
        up = np.repeat(np.repeat(dy, 2, axis=1), 2, axis=2)
        _accum(x, up * 0.25)

    return Node(y, (x,), backward)


def upsample2(x):
    """2x nearest-neighbor upsampling."""
    xv = value_of(x)
    y = np.repeat(np.repeat(xv, 2, axis=1), 2, axis=2)
    if not _tracking(x):
        return y

    def backward(dy):
        n, h2, w2, c = dy.shape
        _accum(x, dy.reshape(n, h2 // 2, 2, w2 // 2, 2, c).sum(axis=(2, 4)))

    return Node(y, (x,), backward)


def concat(xs):
    """Concatenate along the channel (last) axis."""
    vals = [value_of(x) for x in xs]
    y = np.concatenate(vals, axis=3)
    if not _tracking(*xs):
        return y
    sizes = [v.shape[3] for v in vals]

    def backward(dy):
        offset = 0
        for x, size in zip(xs, sizes):
            _accum(x, dy[:, :, :, offset : offset + size])
            offset += size

    return Node(y, tuple(xs), backward)


def mse(pred, target: np.ndarray):
    """Mean squared error against a constant target; scalar output."""
    pv = value_of(pred)
    if pv.shape != target.shape:
        raise NetworkError(f"shape mismatch {pv.shape} vs {target.shape}")
    diff = pv - target
    y = float(np.mean(diff * diff, dtype=np.float64))
    if not _tracking(pred):
        return y

    def backward(dy):
        _accum(pred, diff * (2.0 * float(dy) / diff.size))

    return Node(y, (pred,), backward)


def add(a, b):
    y = value_of(a) + value_of(b)
    if not _tracking(a, b):
        return y

    def backward(dy):
        _accum(a, dy)
        _accum(b, dy)

    return Node(y, (a, b), backward)


def backward(root: Node) -> None:
    """Backpropagate from a scalar root through the recorded tape."""
    topo: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if isinstance(p, Node) and id(p) not in visited:
                stack.append((p, False))
    root.grad = 1.0
    for node in reversed(topo):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)
