"""Reverse-mode differentiation over numpy arrays.

A :class:`GradientTape` records every primitive applied to watched tensors in
execution order, which is already a topological order, so :func:`backward`
is a single reverse sweep. Only the primitives the objectives need exist.

The module-level functions (``exp``, ``log``, ``sum`` ...) accept plain
arrays as well and then just call numpy, so formulas can be written once and
evaluated either with or without gradients.
"""
from __future__ import annotations

import numpy as np

from .exceptions import ContractError


class GradientTape:
    def __init__(self):
        self.nodes: list[Tensor] = []
        self.sources: list[Tensor] = []

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def watch(self, value, name: str | None = None) -> "Tensor":
        t = Tensor(np.array(value, dtype=np.float64), self, name=name)
        self.sources.append(t)
        return t

    def replay(self) -> dict[int, np.ndarray]:
        """Recompute every recorded node from the source values.

        Returns a map ``id(node) -> recomputed value``; recorded values are left
        untouched.
        """
        values = {id(s): s.value for s in self.sources}
        for node in self.nodes:
            args = [values[id(p)] if isinstance(p, Tensor) else p for p in node.parents]
            values[id(node)] = node.fwd(*args)
        return values


class Tensor:
    __slots__ = ("value", "tape", "parents", "fwd", "vjp", "name")
    __array_ufunc__ = None  # make numpy defer binary operators to us

    def __init__(self, value, tape, parents=(), fwd=None, vjp=None, name=None):
        self.value = value
        self.tape = tape
        self.parents = parents
        self.fwd = fwd
        self.vjp = vjp
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}{', ' + self.name if self.name else ''})"

    def __add__(self, o):
        return _apply(np.add, _vjp_add, self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return _apply(np.subtract, _vjp_sub, self, o)

    def __rsub__(self, o):
        return _apply(np.subtract, _vjp_sub, o, self)

    def __mul__(self, o):
        return _apply(np.multiply, _vjp_mul, self, o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return _apply(np.divide, _vjp_div, self, o)

    def __rtruediv__(self, o):
        return _apply(np.divide, _vjp_div, o, self)

    def __neg__(self):
        return _apply(np.negative, lambda g, out, a: (-g,), self)

    def __matmul__(self, o):
        return _apply(np.matmul, _vjp_matmul, self, o)

    def __rmatmul__(self, o):
        return _apply(np.matmul, _vjp_matmul, o, self)

    def __getitem__(self, idx):
        def fwd(a):
            return a[idx]

        def vjp(g, out, a):
            full = np.zeros_like(a)
            if _fancy(idx):
                np.add.at(full, idx, g)
            else:
                full[idx] = g
            return (full,)

        return _apply(fwd, vjp, self)


def _fancy(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def _val(x):
    return x.value if isinstance(x, Tensor) else x


def _apply(fwd, vjp, *args) -> Tensor | np.ndarray:
    tape = None
    for a in args:
        if isinstance(a, Tensor):
            if tape is None:
                tape = a.tape
            elif a.tape is not tape:
                raise ContractError("tensors from different tapes combined")
    out = fwd(*[_val(a) for a in args])
    if tape is None:
        return out
    node = Tensor(np.asarray(out, dtype=np.float64), tape, tuple(args), fwd, vjp)
    tape.nodes.append(node)
    return node


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _vjp_add(g, out, a, b):
    return _unbroadcast(g, np.shape(a)), _unbroadcast(g, np.shape(b))


def _vjp_sub(g, out, a, b):
    return _unbroadcast(g, np.shape(a)), _unbroadcast(-g, np.shape(b))


def _vjp_mul(g, out, a, b):
    return _unbroadcast(g * b, np.shape(a)), _unbroadcast(g * a, np.shape(b))


def _vjp_div(g, out, a, b):
    return _unbroadcast(g / b, np.shape(a)), _unbroadcast(-g * out / b, np.shape(b))


def _vjp_matmul(g, out, a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if b.ndim != 2:
        raise ContractError("matmul gradient supports a 2-D right operand only")
    ga = g @ b.T
    gb = a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
    return _unbroadcast(ga, a.shape), gb


def exp(x):
    return _apply(np.exp, lambda g, out, a: (g * out,), x)


def log(x):
    return _apply(np.log, lambda g, out, a: (g / a,), x)


def tanh(x):
    return _apply(np.tanh, lambda g, out, a: (g * (1.0 - out * out),), x)


def sqrt(x):
    return _apply(np.sqrt, lambda g, out, a: (0.5 * g / out,), x)


def square(x):
    return _apply(np.square, lambda g, out, a: (2.0 * g * a,), x)


def clip(x, lo: float, hi: float):
    def fwd(a):
        return np.clip(a, lo, hi)

    def vjp(g, out, a):
        return (g * ((a >= lo) & (a <= hi)),)

    return _apply(fwd, vjp, x)


def logaddexp(x, y):
    def vjp(g, out, a, b):
        return _unbroadcast(g * np.exp(a - out), np.shape(a)), _unbroadcast(g * np.exp(b - out), np.shape(b))

    return _apply(np.logaddexp, vjp, x, y)


def sum(x, axis=None, keepdims: bool = False):  # noqa: A001 - mirrors numpy
    def fwd(a):
        return np.sum(a, axis=axis, keepdims=keepdims)

    def vjp(g, out, a):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _apply(fwd, vjp, x)


def mean(x, axis=None, keepdims: bool = False):
    n = np.size(_val(x)) if axis is None else np.prod([np.shape(_val(x))[i] for i in np.atleast_1d(axis)])
    return sum(x, axis=axis, keepdims=keepdims) * (1.0 / n)


def value(x) -> np.ndarray:
    """Plain array behind ``x`` (identity for arrays)."""
    return np.asarray(_val(x))


def stop_gradient(x):
    return np.array(_val(x))


def backward(tape: GradientTape, loss: Tensor | None = None) -> list[np.ndarray]:
    """Gradients of a scalar ``loss`` (default: last recorded node) for every watched source.

    The result is aligned with ``tape.sources``; sources the loss does not
    depend on get zero gradients.
    """
    if loss is None:
        if not tape.nodes:
            return [np.zeros_like(s.value) for s in tape.sources]
        loss = tape.nodes[-1]
    if not isinstance(loss, Tensor) or loss.tape is not tape:
        # constant loss: nothing on the tape feeds it
        return [np.zeros_like(s.value) for s in tape.sources]
    if loss.value.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        pvals = [_val(p) for p in node.parents]
        for p, gp in zip(node.parents, node.vjp(g, node.value, *pvals)):
            if isinstance(p, Tensor):
                k = id(p)
                grads[k] = grads[k] + gp if k in grads else gp
    return [grads.get(id(s), np.zeros_like(s.value)) for s in tape.sources]
