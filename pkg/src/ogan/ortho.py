"""Mean / spread / standardisation of latent vectors and the correlation loss.

All operators act on the last axis, so a ``[B, n_z]`` batch is processed row by
row. Each function builds graph nodes when handed a :class:`~ogan.ndnum.Node`
and evaluates eagerly (returning floats or arrays) when handed plain arrays.
"""

from __future__ import annotations

import functools

from . import ndnum as nd

DEFAULT_EPS = 1e-8


def _eager_or_graph(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        if any(isinstance(a, nd.Node) for a in args):
            return fn(*args, **kwargs)
        return nd.evaluate(lambda *nodes: fn(*nodes, **kwargs), *args)
    return wrapper


def _require_dim(v: nd.Node, minimum: int, what: str) -> None:
    if v.shape and v.shape[-1] is not None and v.shape[-1] < minimum:
        raise ValueError(f"{what} needs vectors of length >= {minimum}, got {v.shape[-1]}")


def _centered(v: nd.Node) -> nd.Node:
    return v - nd.reduce_mean(v, axis=-1, keepdims=True)


def _spread(v: nd.Node, keepdims: bool = False) -> nd.Node:
    return nd.sqrt(nd.reduce_mean(nd.square(_centered(v)), axis=-1, keepdims=keepdims))


@_eager_or_graph
def avg(v):
    """Arithmetic mean over the last axis."""
    _require_dim(v, 1, "avg")
    return nd.reduce_mean(v, axis=-1)


@_eager_or_graph
def std(v):
    """Population standard deviation (divisor n, not n - 1)."""
    _require_dim(v, 1, "std")
    return _spread(v)


@_eager_or_graph
def normalize(v, eps: float = DEFAULT_EPS):
    """(v - avg(v)) / (std(v) + eps); raises SingularityError for constant v at eps=0."""
    _require_dim(v, 3, "normalize")
    return _centered(v) / (_spread(v, keepdims=True) + eps)


@_eager_or_graph
def pearson(z, z_hat, eps: float = DEFAULT_EPS):
    """Pearson correlation of ``z`` and ``z_hat`` along the last axis.

    With ``eps > 0`` a constant argument yields 0 instead of a division error.
    """
    _require_dim(z, 3, "pearson")
    _require_dim(z_hat, 3, "pearson")
    if z.shape and z_hat.shape and None not in (z.shape[-1], z_hat.shape[-1]) \
            and z.shape[-1] != z_hat.shape[-1]:
        raise ValueError(f"pearson needs equal lengths, got {z.shape[-1]} and {z_hat.shape[-1]}")
    cov = nd.reduce_mean(_centered(z) * _centered(z_hat), axis=-1)
    return cov / ((_spread(z) + eps) * (_spread(z_hat) + eps))


@_eager_or_graph
def normalized_mse(z, z_hat, eps: float = DEFAULT_EPS):
    """||normalize(z) - normalize(z_hat)||^2, equal to 2 n (1 - pearson) at eps=0."""
    diff = normalize(z, eps=eps) - normalize(z_hat, eps=eps)
    return nd.reduce_sum(nd.square(diff), axis=-1)
