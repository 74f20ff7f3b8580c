"""Fully-connected generator and encoder networks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import ndnum as nd
from .ndnum import Rng

ACTIVATIONS = ("relu", "leaky_relu", "tanh", "linear")
INIT_SCHEMES = ("glorot_uniform", "zeros")


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    hidden_dims: tuple
    output_dim: int
    hidden_activation: str = "relu"
    output_activation: str = "linear"
    init_scheme: str = "glorot_uniform"
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if not self.hidden_dims:
            raise ValueError("hidden_dims must not be empty")
        dims = self.dims
        if any(d < 1 for d in dims):
            raise ValueError(f"all layer widths must be >= 1, got {dims}")
        for act in (self.hidden_activation, self.output_activation):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}; choose from {ACTIVATIONS}")
        if self.init_scheme not in INIT_SCHEMES:
            raise ValueError(f"unknown init scheme {self.init_scheme!r}")

    @property
    def dims(self) -> tuple:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @property
    def param_count(self) -> int:
        d = self.dims
        return sum(d[i] * d[i + 1] + d[i + 1] for i in range(len(d) - 1))


@dataclass
class Layer:
    weight: np.ndarray  # [in, out]
    bias: np.ndarray  # [out]
    activation: str


@dataclass
class MlpParams:
    layers: List[Layer] = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    @property
    def param_count(self) -> int:
        return sum(layer.weight.size + layer.bias.size for layer in self.layers)

    def named(self, prefix: str) -> Dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"{prefix}.{i}.W"] = layer.weight
            out[f"{prefix}.{i}.b"] = layer.bias
        return out

    def replace(self, prefix: str, arrays: Dict[str, np.ndarray]) -> "MlpParams":
        """Copy with the arrays named ``prefix.i.W`` / ``prefix.i.b`` swapped in."""
        layers = []
        for i, layer in enumerate(self.layers):
            w = arrays.get(f"{prefix}.{i}.W", layer.weight)
            b = arrays.get(f"{prefix}.{i}.b", layer.bias)
            if w.shape != layer.weight.shape or b.shape != layer.bias.shape:
                raise ValueError(f"shape mismatch replacing layer {prefix}.{i}: "
                                 f"{w.shape}/{b.shape} vs {layer.weight.shape}/{layer.bias.shape}")
            layers.append(Layer(w, b, layer.activation))
        return MlpParams(layers)

    def copy(self) -> "MlpParams":
        return MlpParams([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])


def build_mlp(spec: NetSpec, rng: Optional[Rng] = None) -> MlpParams:
    """Glorot-uniform weights and zero biases, reproducible from ``rng`` (or ``spec.seed``)."""
    if rng is None:
        rng = Rng(spec.init_seed).split("init")
    dims = spec.dims
    layers = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        if spec.init_scheme == "zeros":
            w = np.zeros((fan_in, fan_out), dtype=np.float32)
        else:
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            u = rng.uniform(fan_in * fan_out).reshape(fan_in, fan_out)
            w = ((2.0 * u - 1.0) * bound).astype(np.float32)
        b = np.zeros(fan_out, dtype=np.float32)
        last = i == len(dims) - 2
        layers.append(Layer(w, b, spec.output_activation if last else spec.hidden_activation))
    return MlpParams(layers)


def _activate(x: nd.Node, activation: str) -> nd.Node:
    if activation == "relu":
        return nd.relu(x)
    if activation == "leaky_relu":
        return nd.leaky_relu(x, 0.2)
    if activation == "tanh":
        return nd.tanh(x)
    return x


class BoundNet:
    """An MLP whose weights are graph placeholders named ``prefix.i.W`` / ``prefix.i.b``.

    Calling it on a node builds the forward graph; :meth:`feeds` supplies the
    current weights. Every call shares the same weight placeholders.
    """

    def __init__(self, params: MlpParams, prefix: str):
        self.params = params
        self.prefix = prefix
        self._weights = [
            (nd.placeholder(f"{prefix}.{i}.W", layer.weight.shape),
             nd.placeholder(f"{prefix}.{i}.b", layer.bias.shape),
             layer.activation)
            for i, layer in enumerate(params.layers)
        ]

    def __call__(self, x: nd.Node) -> nd.Node:
        h = x
        for w, b, activation in self._weights:
            h = _activate(nd.bias_add(nd.matmul(h, w), b), activation)
        return h

    def feeds(self) -> Dict[str, np.ndarray]:
        return self.params.named(self.prefix)

    @property
    def names(self) -> List[str]:
        return list(self.params.named(self.prefix))


def _run(params: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise nd.ShapeError(nd.placeholder("input"), (None, params.input_dim), x.shape,
                            "network input")
    net = BoundNet(params, "net")
    inp = nd.placeholder("input", (None, params.input_dim))
    return nd.forward(net(inp), {"input": x, **net.feeds()})


def gen_forward(G: MlpParams, z: np.ndarray) -> np.ndarray:
    """G(z) for a [B, n_z] batch."""
    return _run(G, z)


def enc_forward(E: MlpParams, x: np.ndarray) -> np.ndarray:
    """E(x) for a [B, n_x] batch."""
    return _run(E, x)


def generator_spec(n_z: int, n_x: int, hidden: Sequence[int] = (64, 64), seed: int = 0) -> NetSpec:
    return NetSpec(n_z, tuple(hidden), n_x, "relu", "tanh", init_seed=seed)


def encoder_spec(n_x: int, n_z: int, hidden: Sequence[int] = (64, 64), seed: int = 0) -> NetSpec:
    return NetSpec(n_x, tuple(hidden), n_z, "leaky_relu", "linear", init_seed=seed)
