"""Define-then-run computation graphs with reverse-mode gradients.

A graph is built from :class:`Node` objects without computing anything.
:func:`forward` evaluates it for a set of named feeds and :func:`backward`
propagates the gradient of a scalar root back to every node, returning the
gradients of the named placeholders.

Values are plain ``numpy`` arrays. Training runs in float32; passing
``dtype=np.float64`` to :func:`forward` evaluates the same graph in double
precision, which is what the finite-difference checks use.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

Shape = Optional[tuple]

_ids = itertools.count()


class GraphError(Exception):
    """Base class for graph construction and evaluation failures."""


class ShapeError(GraphError, ValueError):
    def __init__(self, node: "Node", left, right, detail: str = ""):
        self.node = node.label
        self.shapes = (tuple(left) if left is not None else None,
                       tuple(right) if right is not None else None)
        msg = f"shape mismatch at {self.node}: {self.shapes[0]} vs {self.shapes[1]}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SingularityError(GraphError, ArithmeticError):
    """Division by an exact zero (e.g. normalising a constant vector with eps=0)."""


class NonFiniteError(GraphError, FloatingPointError):
    pass


class Node:
    """One vertex of the graph: a leaf (placeholder/const) or a primitive application."""

    __slots__ = ("op", "inputs", "attrs", "name", "shape", "value", "grad", "id", "_order")

    def __init__(self, op: str, inputs: Sequence["Node"] = (), attrs: Optional[dict] = None,
                 name: Optional[str] = None, shape: Shape = None):
        self.op = op
        self.inputs = tuple(inputs)
        self.attrs = attrs or {}
        self.name = name
        self.shape = shape
        self.value: Optional[np.ndarray] = None
        self.grad: Optional[np.ndarray] = None
        self.id = next(_ids)
        self._order: Optional[list] = None

    @property
    def label(self) -> str:
        return f"{self.op}#{self.id}" + (f"[{self.name}]" if self.name else "")

    def __repr__(self) -> str:
        return f"Node({self.label}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


TensorLike = Union[Node, np.ndarray, float, int, Sequence]


def lift(x: TensorLike) -> Node:
    return x if isinstance(x, Node) else const(x)


# --------------------------------------------------------------------------
# static shape inference (best effort; None marks an unknown extent)


def _broadcast_shapes(node, a: Shape, b: Shape) -> Shape:
    if a is None or b is None:
        return None
    out = []
    for i in range(1, max(len(a), len(b)) + 1):
        da = a[-i] if i <= len(a) else 1
        db = b[-i] if i <= len(b) else 1
        if da is None or db is None:
            out.append(da if db == 1 else db if da == 1 else (da if da is not None else db))
        elif da == db or db == 1:
            out.append(da)
        elif da == 1:
            out.append(db)
        else:
            raise ShapeError(node, a, b, "operands do not broadcast")
    return tuple(reversed(out))


def _reduced_shape(shape: Shape, axis, keepdims: bool) -> Shape:
    if shape is None:
        return None
    if axis is None:
        return (1,) * len(shape) if keepdims else ()
    ax = axis % len(shape)
    if keepdims:
        return shape[:ax] + (1,) + shape[ax + 1:]
    return shape[:ax] + shape[ax + 1:]


# --------------------------------------------------------------------------
# primitive table


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, extent in enumerate(shape):
        if extent == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _expand_reduced(g: np.ndarray, shape: tuple, axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def _mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # float32 products are exact in float64; accumulating there and rounding once
    # makes row i of a batched product identical to the product of row i alone.
    if a.dtype == np.float32 and b.dtype == np.float32:
        return (a.astype(np.float64) @ b.astype(np.float64)).astype(np.float32)
    return a @ b


def _matmul_fwd(node, a, b):
    if a.ndim == 0 or b.ndim == 0 or a.ndim > 2 or b.ndim > 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(node, a.shape, b.shape, "matmul needs [m,k] @ [k,n]")
    return _mm(a, b)


def _matmul_bwd(g, a, b, out, attrs):
    if a.ndim == 1 and b.ndim == 1:
        return g * b, g * a
    if b.ndim == 1:
        return np.outer(g, b), a.T @ g
    if a.ndim == 1:
        return b @ g, np.outer(a, g)
    return g @ b.T, a.T @ g


def _div_fwd(node, a, b):
    if np.any(b == 0):
        raise SingularityError(f"division by zero at {node.label}")
    return a / b


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype)


def _tanh_fwd(node, x):
    # keep the output strictly inside (-1, 1) where the dtype would round to +-1
    edge = np.nextafter(x.dtype.type(1), x.dtype.type(0))
    return np.clip(np.tanh(x), -edge, edge)


def _slice_fwd(node, x):
    ax, start, stop = node.attrs["axis"], node.attrs["start"], node.attrs["stop"]
    if not (0 <= start < stop <= x.shape[ax]):
        raise ShapeError(node, x.shape, (start, stop), f"slice out of range on axis {ax}")
    idx = [slice(None)] * x.ndim
    idx[ax] = slice(start, stop)
    return x[tuple(idx)]


def _slice_bwd(g, x, out, attrs):
    full = np.zeros_like(x)
    idx = [slice(None)] * x.ndim
    idx[attrs["axis"]] = slice(attrs["start"], attrs["stop"])
    full[tuple(idx)] = g
    return (full,)


def _concat_fwd(node, *xs):
    ax = node.attrs["axis"]
    try:
        return np.concatenate(xs, axis=ax)
    except ValueError:
        raise ShapeError(node, xs[0].shape, xs[-1].shape, f"concat along axis {ax}") from None


def _concat_bwd(g, *args):
    *xs, out, attrs = args
    ax = attrs["axis"]
    cuts = np.cumsum([x.shape[ax] for x in xs])[:-1]
    return tuple(np.split(g, cuts, axis=ax))


def _bias_fwd(node, x, b):
    if b.ndim != 1 or x.ndim < 1 or x.shape[-1] != b.shape[0]:
        raise ShapeError(node, x.shape, b.shape, "bias must match the last axis")
    return x + b


def _binary(fn):
    def forward(node, a, b):
        try:
            np.broadcast_shapes(a.shape, b.shape)
        except ValueError:
            raise ShapeError(node, a.shape, b.shape, "operands do not broadcast") from None
        return fn(a, b)
    return forward


class _Prim(NamedTuple):
    forward: Callable
    # backward(g, *input_values, output_value, attrs) -> tuple of input grads
    backward: Callable


_PRIMS = {
    "add": _Prim(_binary(np.add),
                 lambda g, a, b, out, at: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))),
    "sub": _Prim(_binary(np.subtract),
                 lambda g, a, b, out, at: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))),
    "mul": _Prim(_binary(np.multiply),
                 lambda g, a, b, out, at: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape))),
    "div": _Prim(_div_fwd,
                 lambda g, a, b, out, at: (_unbroadcast(g / b, a.shape),
                                           _unbroadcast(-g * out / b, b.shape))),
    "matmul": _Prim(_matmul_fwd, _matmul_bwd),
    "sum": _Prim(lambda node, x: np.sum(x, axis=node.attrs["axis"], keepdims=node.attrs["keepdims"]),
                 lambda g, x, out, at: (_expand_reduced(g, x.shape, at["axis"], at["keepdims"]),)),
    "mean": _Prim(lambda node, x: np.mean(x, axis=node.attrs["axis"], keepdims=node.attrs["keepdims"]),
                  lambda g, x, out, at: (_expand_reduced(g, x.shape, at["axis"], at["keepdims"])
                                         * x.dtype.type(out.size / x.size),)),
    "square": _Prim(lambda node, x: x * x, lambda g, x, out, at: (2 * g * x,)),
    # d sqrt(v)/dv is unbounded at v = 0; take the zero subgradient there
    "sqrt": _Prim(lambda node, x: np.sqrt(x),
                  lambda g, x, out, at: (np.where(out > 0, g / np.where(out > 0, 2 * out, 1), 0),)),
    "exp": _Prim(lambda node, x: np.exp(x), lambda g, x, out, at: (g * out,)),
    "softplus": _Prim(lambda node, x: np.logaddexp(x.dtype.type(0), x),
                      lambda g, x, out, at: (g * _sigmoid(x),)),
    "relu": _Prim(lambda node, x: np.maximum(x, 0), lambda g, x, out, at: (g * (x > 0),)),
    "leaky_relu": _Prim(lambda node, x: np.where(x > 0, x, x * node.attrs["slope"]),
                        lambda g, x, out, at: (g * np.where(x > 0, 1, at["slope"]).astype(x.dtype),)),
    "tanh": _Prim(_tanh_fwd, lambda g, x, out, at: (g * (1 - out * out),)),
    "bias_add": _Prim(_bias_fwd,
                      lambda g, x, b, out, at: (g, g.reshape(-1, b.shape[0]).sum(axis=0))),
    "slice": _Prim(_slice_fwd, _slice_bwd),
    "concat": _Prim(_concat_fwd, _concat_bwd),
    "stop_gradient": _Prim(lambda node, x: x, lambda g, x, out, at: (np.zeros_like(x),)),
}

PRIMITIVES = tuple(_PRIMS)


# --------------------------------------------------------------------------
# builders


def placeholder(name: str, shape: Shape = None) -> Node:
    """A named leaf supplied through ``feeds``; ``None`` extents accept any size."""
    return Node("placeholder", name=name, shape=tuple(shape) if shape is not None else None)


def const(value, name: Optional[str] = None) -> Node:
    arr = np.array(value, dtype=np.float64)
    return Node("const", attrs={"value": arr}, name=name, shape=arr.shape)


def _elementwise(op: str, a: TensorLike, b: TensorLike) -> Node:
    a, b = lift(a), lift(b)
    node = Node(op, (a, b))
    node.shape = _broadcast_shapes(node, a.shape, b.shape)
    return node


def add(a, b) -> Node:
    return _elementwise("add", a, b)


def sub(a, b) -> Node:
    return _elementwise("sub", a, b)


def mul(a, b) -> Node:
    return _elementwise("mul", a, b)


def div(a, b) -> Node:
    return _elementwise("div", a, b)


def matmul(a, b) -> Node:
    a, b = lift(a), lift(b)
    node = Node("matmul", (a, b))
    if a.shape is not None and b.shape is not None:
        ka, kb = a.shape[-1], b.shape[0]
        if ka is not None and kb is not None and ka != kb:
            raise ShapeError(node, a.shape, b.shape, "matmul needs [m,k] @ [k,n]")
        node.shape = a.shape[:-1] + b.shape[1:]
    return node


def reduce_sum(x, axis: Optional[int] = None, keepdims: bool = False) -> Node:
    x = lift(x)
    return Node("sum", (x,), {"axis": axis, "keepdims": keepdims},
                shape=_reduced_shape(x.shape, axis, keepdims))


def reduce_mean(x, axis: Optional[int] = None, keepdims: bool = False) -> Node:
    x = lift(x)
    return Node("mean", (x,), {"axis": axis, "keepdims": keepdims},
                shape=_reduced_shape(x.shape, axis, keepdims))


def _unary(op: str, x, **attrs) -> Node:
    x = lift(x)
    return Node(op, (x,), attrs, shape=x.shape)


def square(x) -> Node:
    return _unary("square", x)


def sqrt(x) -> Node:
    return _unary("sqrt", x)


def exp(x) -> Node:
    return _unary("exp", x)


def softplus(x) -> Node:
    """log(1 + e^x), evaluated stably."""
    return _unary("softplus", x)


def relu(x) -> Node:
    return _unary("relu", x)


def leaky_relu(x, slope: float = 0.2) -> Node:
    return _unary("leaky_relu", x, slope=slope)


def tanh(x) -> Node:
    return _unary("tanh", x)


def stop_gradient(x) -> Node:
    """Identity on the forward pass; blocks gradient flow on the backward pass."""
    return _unary("stop_gradient", x)


def bias_add(x, b) -> Node:
    x, b = lift(x), lift(b)
    node = Node("bias_add", (x, b), shape=x.shape)
    if x.shape and b.shape and x.shape[-1] is not None and b.shape[0] is not None \
            and x.shape[-1] != b.shape[0]:
        raise ShapeError(node, x.shape, b.shape, "bias must match the last axis")
    return node


def slice_(x, start: int, stop: int, axis: int = -1) -> Node:
    x = lift(x)
    shape = None
    if x.shape is not None:
        shape = list(x.shape)
        shape[axis] = stop - start
        shape = tuple(shape)
    return Node("slice", (x,), {"axis": axis, "start": start, "stop": stop}, shape=shape)


def concat(xs: Sequence, axis: int = -1) -> Node:
    xs = [lift(x) for x in xs]
    shape = None
    if all(x.shape is not None for x in xs):
        shape = list(xs[0].shape)
        extents = [x.shape[axis] for x in xs]
        shape[axis] = None if None in extents else sum(extents)
        shape = tuple(shape)
    return Node("concat", xs, {"axis": axis}, shape=shape)


# --------------------------------------------------------------------------
# evaluation


def topological_order(roots: Iterable[Node]) -> list:
    order, seen = [], set()
    for root in roots:
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if node.id in seen:
                continue
            if expanded:
                seen.add(node.id)
                order.append(node)
                continue
            stack.append((node, True))
            for parent in reversed(node.inputs):
                if parent.id not in seen:
                    stack.append((parent, False))
    return order


def _order_for(root: Node) -> list:
    if root._order is None:
        root._order = topological_order([root])
    return root._order


def _check_feed(node: Node, arr: np.ndarray) -> None:
    if node.shape is None:
        return
    if len(node.shape) != arr.ndim or any(
            want is not None and want != got for want, got in zip(node.shape, arr.shape)):
        raise ShapeError(node, node.shape, arr.shape, "feed does not match placeholder")


def forward(roots: Union[Node, Sequence[Node]], feeds: Optional[Mapping[str, np.ndarray]] = None,
            dtype=np.float32):
    """Evaluate ``roots`` and every node they depend on.

    Returns the root value, or a list of values when a sequence of roots is given.
    Raises :class:`ShapeError` on a feed or operand mismatch, :class:`SingularityError`
    on an exact division by zero and :class:`NonFiniteError` if a NaN/Inf appears.
    """
    feeds = feeds or {}
    single = isinstance(roots, Node)
    root_list = [roots] if single else list(roots)
    order = _order_for(root_list[0]) if single else topological_order(root_list)
    # overflow surfaces as NonFiniteError below, not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        for node in order:
            node.grad = None
            if node.op == "placeholder":
                if node.name not in feeds:
                    raise GraphError(f"no feed for placeholder {node.name!r}")
                value = np.asarray(feeds[node.name], dtype=dtype)
                _check_feed(node, value)
            elif node.op == "const":
                value = node.attrs["value"].astype(dtype)
            else:
                value = _PRIMS[node.op].forward(node, *(p.value for p in node.inputs))
                if value.dtype != dtype:
                    value = value.astype(dtype)
            # a finite sum implies finite entries; only a non-finite sum needs the full scan
            if not math.isfinite(value.sum()) and not np.isfinite(value).all():
                raise NonFiniteError(f"non-finite value produced at {node.label}")
            node.value = value
    values = [r.value for r in root_list]
    return values[0] if single else values


def backward(root: Node) -> dict:
    """Gradient of the scalar ``root`` w.r.t. every placeholder, keyed by name.

    Every node reachable from ``root`` also gets its ``grad`` attribute set.
    """
    order = _order_for(root)
    if any(node.value is None for node in order):
        raise GraphError("backward() called before forward()")
    if root.value.size != 1:
        raise GraphError(f"backward() needs a scalar root, got shape {root.value.shape}")
    grads = {root.id: np.ones_like(root.value)}
    for node in reversed(order):
        g = grads.pop(node.id, None)
        if g is None:
            g = np.zeros_like(node.value)
        node.grad = g
        if not node.inputs:
            continue
        prim = _PRIMS[node.op]
        parts = prim.backward(g, *(p.value for p in node.inputs), node.value, node.attrs)
        for parent, part in zip(node.inputs, parts):
            part = np.asarray(part, dtype=parent.value.dtype).reshape(parent.value.shape)
            if parent.id in grads:
                grads[parent.id] = grads[parent.id] + part
            else:
                grads[parent.id] = part
    out = {}
    for node in order:
        if node.op == "placeholder":
            out[node.name] = node.grad
    return out


def evaluate(fn: Callable[..., Node], *args, dtype=None):
    """Run a graph-building function eagerly on concrete arrays.

    Arguments are wrapped as constants; the result comes back as a Python float
    for scalar outputs and as an array otherwise. When every argument is a float32
    array the graph runs in float32; anything else (float64, Python numbers and
    lists) runs in float64.
    """
    arrays = [np.asarray(a) for a in args]
    if dtype is None:
        dtype = np.float32 if all(a.dtype == np.float32 for a in arrays) else np.float64
    root = fn(*(const(a) for a in arrays))
    value = forward(root, {}, dtype=dtype)
    return float(value) if value.ndim == 0 else value
