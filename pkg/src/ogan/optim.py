"""RMSprop over named float32 parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np


class NonFiniteGradient(FloatingPointError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"non-finite gradient for parameter {name!r}")


@dataclass
class OptState:
    accumulators: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Dict[str, np.ndarray]) -> "OptState":
        return cls({k: np.zeros_like(v) for k, v in params.items()})


def rmsprop_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], opt: OptState,
                 lr: float, decay: float = 0.99, eps: float = 1e-8
                 ) -> Tuple[Dict[str, np.ndarray], OptState]:
    """acc <- decay*acc + (1-decay)*g^2 ; param <- param - lr*g/(sqrt(acc)+eps).

    Returns fresh arrays; the inputs are left untouched.
    """
    new_params, new_acc = {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(name)
        acc = decay * opt.accumulators[name] + (1.0 - decay) * g * g
        new_acc[name] = acc.astype(p.dtype)
        new_params[name] = (p - lr * g / (np.sqrt(new_acc[name]) + eps)).astype(p.dtype)
    return new_params, OptState(new_acc, opt.step + 1)
