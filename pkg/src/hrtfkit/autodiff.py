"""Minimal reverse-mode automatic differentiation on numpy arrays.

Every operation on a Tensor records its parents together with a
vector-Jacobian closure. The closures are themselves written in terms of
Tensor operations, so the backward pass can be recorded and differentiated
again: grad(..., create_graph=True) yields adjoints that participate in a
later grad call, which is what the exact gradient through the latent
inference step requires.

Creation order doubles as a topological order (parents always exist before
children), which keeps the backward traversal and its floating-point
reduction order deterministic.
"""

from __future__ import annotations

import itertools

import numpy as np

_counter = itertools.count()


class Tensor:
    __slots__ = ("value", "requires_grad", "_parents", "_id")

    # Make ndarray binary ops defer to our reflected operators instead of
    # coercing a Tensor operand elementwise.
    __array_ufunc__ = None

    def __init__(self, value, requires_grad: bool = False, _parents=()):
        self.value = value if isinstance(value, np.ndarray) else np.asarray(value)
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in _parents)
        self._parents = tuple(_parents) if self.requires_grad else ()
        self._id = next(_counter)

    # -- introspection --------------------------------------------------
    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def T(self):
        return transpose(self)

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    # -- operators -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)


def _is_number(x) -> bool:
    return isinstance(x, (int, float, np.floating, np.integer))


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: Tensor, shape: tuple) -> Tensor:
    """Sum a cotangent down to the shape of a broadcast operand."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = tsum(g, axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = tsum(g, axis=axes, keepdims=True)
    return g


# --- primitive operations ---------------------------------------------------
# Each returns a new Tensor; closures use Tensor ops only so that backward
# passes stay differentiable. Plain ndarrays and scalars pass straight
# through to numpy, letting inference share the same code path.


def add(a, b):
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a + b
    if _is_number(b):
        a = as_tensor(a)
        return Tensor(a.value + b, _parents=[(a, lambda g: g)])
    if _is_number(a):
        b = as_tensor(b)
        return Tensor(a + b.value, _parents=[(b, lambda g: g)])
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value + b.value,
        _parents=[
            (a, lambda g: _unbroadcast(g, a.shape)),
            (b, lambda g: _unbroadcast(g, b.shape)),
        ],
    )


def neg(a):
    if not isinstance(a, Tensor):
        return -a
    return Tensor(-a.value, _parents=[(a, lambda g: neg(g))])


def sub(a, b):
    return add(a, neg(b) if isinstance(b, Tensor) else -b)


def mul(a, b):
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a * b
    if _is_number(b):
        a = as_tensor(a)
        return Tensor(a.value * b, _parents=[(a, lambda g: mul(g, b))])
    if _is_number(a):
        b = as_tensor(b)
        return Tensor(a * b.value, _parents=[(b, lambda g: mul(g, a))])
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value * b.value,
        _parents=[
            (a, lambda g: _unbroadcast(mul(g, b), a.shape)),
            (b, lambda g: _unbroadcast(mul(g, a), b.shape)),
        ],
    )


def matmul(a, b):
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a @ b
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value @ b.value,
        _parents=[
            (a, lambda g: matmul(g, transpose(b))),
            (b, lambda g: matmul(transpose(a), g)),
        ],
    )


def transpose(a):
    if not isinstance(a, Tensor):
        return a.T
    return Tensor(a.value.T, _parents=[(a, lambda g: transpose(g))])


def sin(a):
    if not isinstance(a, Tensor):
        return np.sin(a)
    return Tensor(np.sin(a.value), _parents=[(a, lambda g: mul(g, cos(a)))])


def cos(a):
    if not isinstance(a, Tensor):
        return np.cos(a)
    return Tensor(np.cos(a.value), _parents=[(a, lambda g: mul(g, neg(sin(a))))])


def square(a):
    if not isinstance(a, Tensor):
        return a * a
    return mul(a, a)


def tsum(a, axis=None, keepdims: bool = False):
    """Differentiable sum; mirrors np.sum for plain arrays."""
    if not isinstance(a, Tensor):
        return np.sum(a, axis=axis, keepdims=keepdims)
    in_shape = a.shape

    def vjp(g):
        if axis is None:
            return broadcast_to(reshape(g, (1,) * len(in_shape)), in_shape)
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        if not keepdims:
            kd_shape = list(in_shape)
            for ax in axes:
                kd_shape[ax] = 1
            g = reshape(g, tuple(kd_shape))
        return broadcast_to(g, in_shape)

    return Tensor(np.sum(a.value, axis=axis, keepdims=keepdims), _parents=[(a, vjp)])


def mean(a, axis=None):
    if not isinstance(a, Tensor):
        return np.mean(a, axis=axis)
    if axis is None:
        n = a.value.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        n = int(np.prod([a.shape[ax] for ax in axes]))
    return mul(tsum(a, axis=axis), 1.0 / n)


def reshape(a, shape):
    if not isinstance(a, Tensor):
        return np.reshape(a, shape)
    in_shape = a.shape
    return Tensor(
        a.value.reshape(shape), _parents=[(a, lambda g: reshape(g, in_shape))]
    )


def broadcast_to(a, shape):
    if not isinstance(a, Tensor):
        return np.broadcast_to(a, shape)
    in_shape = a.shape
    return Tensor(
        np.broadcast_to(a.value, shape).copy(),
        _parents=[(a, lambda g: _unbroadcast(g, in_shape))],
    )


def narrow(a, start: int, length: int):
    """Contiguous column slice a[:, start:start+length] of a 2-D operand."""
    if not isinstance(a, Tensor):
        return a[:, start : start + length]
    in_cols = a.shape[1]

    def vjp(g):
        return pad_cols(g, start, in_cols)

    return Tensor(a.value[:, start : start + length], _parents=[(a, vjp)])


def pad_cols(a, start: int, total_cols: int):
    """Embed columns into a zero matrix of total_cols columns (inverse of narrow)."""
    if not isinstance(a, Tensor):
        out = np.zeros((a.shape[0], total_cols), dtype=a.dtype)
        out[:, start : start + a.shape[1]] = a
        return out
    length = a.shape[1]

    def vjp(g):
        return narrow(g, start, length)

    out = np.zeros((a.value.shape[0], total_cols), dtype=a.value.dtype)
    out[:, start : start + length] = a.value
    return Tensor(out, _parents=[(a, vjp)])


# --- backward pass -----------------------------------------------------------


def _reachable(root: Tensor) -> dict[int, Tensor]:
    """Tensors requiring grad that the root depends on, keyed by id."""
    out: dict[int, Tensor] = {}
    stack = [root]
    seen: set[int] = set()
    while stack:
        t = stack.pop()
        if t._id in seen or not t.requires_grad:
            continue
        seen.add(t._id)
        out[t._id] = t
        for p, _ in t._parents:
            stack.append(p)
    return out


def grad(
    output: Tensor, inputs: list[Tensor], create_graph: bool = False
) -> list[Tensor]:
    """Adjoints of a scalar output with respect to each input tensor.

    With create_graph=True the returned adjoints carry their own tape and can
    be differentiated again; otherwise they are detached constants. Inputs
    the output does not depend on receive zero adjoints.
    """
    if output.value.ndim != 0 and output.value.size != 1:
        raise ValueError(f"grad expects a scalar output, got shape {output.shape}")
    nodes = _reachable(output)
    input_ids = {x._id for x in inputs}
    adjoint: dict[int, Tensor] = {
        output._id: Tensor(np.ones_like(output.value))
    }
    for t in sorted(nodes.values(), key=lambda t: t._id, reverse=True):
        g = adjoint.pop(t._id, None)
        if g is None:
            continue
        if t is not output and t.value.shape != g.value.shape:
            raise AssertionError("adjoint shape mismatch")
        for p, vjp in t._parents:
            if not p.requires_grad:
                continue
            contrib = vjp(g)
            held = adjoint.get(p._id)
            adjoint[p._id] = contrib if held is None else add(held, contrib)
        if t._id in input_ids:
            adjoint[t._id] = g  # keep the finished adjoint for collection
    results = []
    for x in inputs:
        gx = adjoint.get(x._id)
        if gx is None:
            gx = Tensor(np.zeros_like(x.value))
        if not np.all(np.isfinite(gx.value)):
            raise FloatingPointError("non-finite gradient")
        results.append(gx if create_graph else gx.detach())
    return results
