"""Dense float tensors (numpy arrays) with a small reverse-mode autodiff graph."""

from .graph import (
    PRIMITIVES,
    GraphError,
    Node,
    NonFiniteError,
    ShapeError,
    SingularityError,
    add,
    backward,
    bias_add,
    concat,
    const,
    div,
    evaluate,
    exp,
    forward,
    leaky_relu,
    lift,
    matmul,
    mul,
    placeholder,
    reduce_mean,
    reduce_sum,
    relu,
    slice_,
    softplus,
    sqrt,
    square,
    stop_gradient,
    sub,
    tanh,
    topological_order,
)
from .gradcheck import GradCheckReport, grad_check
from .rng import Rng

__all__ = [
    "PRIMITIVES", "GraphError", "Node", "NonFiniteError", "ShapeError", "SingularityError",
    "add", "backward", "bias_add", "concat", "const", "div", "evaluate", "exp", "forward",
    "leaky_relu", "lift", "matmul", "mul", "placeholder", "reduce_mean", "reduce_sum", "relu",
    "slice_", "softplus", "sqrt", "square", "stop_gradient", "sub", "tanh", "topological_order",
    "GradCheckReport", "grad_check", "Rng",
]
