"""Reverse-mode autodiff on float32 numpy arrays.

A Tensor wraps an ndarray and, when gradients are wanted, remembers the
tensors it was computed from together with a closure that pushes the
output gradient back onto them.  backward() on a scalar walks the graph
once in reverse topological order.  Graphs are built per forward pass and
thrown away after backward, so parameters can be reused across steps.
"""

from __future__ import annotations

import contextlib

import numpy as np

# While this is False no graph edges are recorded; forwards run plain numpy.
_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (cheap inference forwards)."""
    global _GRAD_ENABLED
    saved = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = saved


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad=False, parents=(), grad_fn=None):
        self.data = np.asarray(data, dtype=np.float32)
        self.grad = None
        wants = requires_grad or any(p.requires_grad for p in parents)
        self.requires_grad = bool(wants) and _GRAD_ENABLED
        # Edges are kept only when a gradient can flow through this node.
        self._parents = tuple(parents) if self.requires_grad else ()
        self._grad_fn = grad_fn if self.requires_grad else None

    # -- graph -----------------------------------------------------------

    def detach(self):
        """A view of the same data with no history."""
        t = Tensor.__new__(Tensor)
        t.data = self.data
        t.grad = None
        t.requires_grad = False
        t._parents = ()
        t._grad_fn = None
        return t

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar, got shape %r" % (self.shape,))
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._grad_fn is not None and node.grad is not None:
                node._grad_fn(node.grad)

    # -- conveniences ------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return "Tensor(shape=%r, requires_grad=%r)" % (self.shape, self.requires_grad)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, shape):
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))


def accumulate(t: Tensor, g: np.ndarray):
    """Add g into t.grad (gradients from graph fan-out sum)."""
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float32, copy=True)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum-reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise arithmetic (broadcasting) --------------------------------


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data + b.data, parents=(a, b))

    def grad_fn(g):
        if a.requires_grad:
            accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            accumulate(b, _unbroadcast(g, b.data.shape))

    if out.requires_grad:
        out._grad_fn = grad_fn
    return out


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data - b.data, parents=(a, b))

    def grad_fn(g):
        if a.requires_grad:
            accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            accumulate(b, _unbroadcast(-g, b.data.shape))

    if out.requires_grad:
        out._grad_fn = grad_fn
    return out


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data * b.data, parents=(a, b))

    def grad_fn(g):
        if a.requires_grad:
            accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    if out.requires_grad:
        out._grad_fn = grad_fn
    return out


def div(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data / b.data, parents=(a, b))

    def grad_fn(g):
        if a.requires_grad:
            accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    if out.requires_grad:
        out._grad_fn = grad_fn
    return out


def sqrt(a):
    a = _wrap(a)
    root = np.sqrt(a.data)
    out = Tensor(root, parents=(a,))

    def grad_fn(g):
        if a.requires_grad:
            accumulate(a, g * (0.5 / root))

    if out.requires_grad:
        out._grad_fn = grad_fn
    return out


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data @ b.data, parents=(a, b))

    def grad_fn(g):
        if a.requires_grad:
            accumulate(a, g @ b.data.T)
        if b.requires_grad:
            accumulate(b, a.data.T @ g)

    if out.requires_grad:
        out._grad_fn = grad_fn
    return out


# -- shape and reduction ---------------------------------------------------


def reshape(a, shape):
    a = _wrap(a)
    out = Tensor(a.data.reshape(shape), parents=(a,))

    def grad_fn(g):
        if a.requires_grad:
            accumulate(a, g.reshape(a.data.shape))

    if out.requires_grad:
        out._grad_fn = grad_fn
    return out


def tsum(a, axis=None, keepdims=False):
    a = _wrap(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), parents=(a,))

    def grad_fn(g):
        if not a.requires_grad:
            return
        if axis is None:
            accumulate(a, np.broadcast_to(g.reshape(()), a.data.shape))
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        accumulate(a, np.broadcast_to(g, a.data.shape))

    if out.requires_grad:
        out._grad_fn = grad_fn
    return out


def tmean(a, axis=None, keepdims=False):
    a = _wrap(a)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= a.data.shape[ax]
    return mul(tsum(a, axis, keepdims), 1.0 / count)


def gradients(loss: Tensor, params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Run backward from a scalar loss and collect gradients for params.

    Parameter .grad slots are cleared first, so repeated calls on fresh
    graphs do not accumulate across steps.  Parameters the loss does not
    depend on get zero gradients.
    """
    for t in params.values():
        t.grad = None
    loss.backward()
    return {
        k: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for k, t in params.items()
    }
