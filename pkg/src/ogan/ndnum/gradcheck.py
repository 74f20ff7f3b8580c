"""Central-difference verification of graph gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .graph import GraphError, Node, NonFiniteError, backward, forward


@dataclass
class GradCheckReport:
    leaf: str
    max_rel_err: float
    passed: bool
    analytic: np.ndarray
    numeric: np.ndarray


def grad_check(root: Node, leaf: str, feeds: Mapping[str, np.ndarray],
               step: float = 1e-3, tolerance: float = 1e-4) -> GradCheckReport:
    """Compare backward() against central differences for one placeholder.

    Everything is evaluated in float64. The relative error of coordinate ``i``
    is ``|a_i - n_i| / max(1, |a_i|)``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    feeds64 = {k: np.array(v, dtype=np.float64) for k, v in feeds.items()}
    if leaf not in feeds64:
        raise GraphError(f"{leaf!r} is not among the feeds")
    forward(root, feeds64, dtype=np.float64)
    analytic = backward(root).get(leaf)
    if analytic is None:
        raise GraphError(f"{leaf!r} does not feed the root")
    analytic = analytic.copy()

    base = feeds64[leaf]
    numeric = np.zeros_like(base)
    flat, num_flat = base.reshape(-1), numeric.reshape(-1)
    try:
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = float(forward(root, feeds64, dtype=np.float64))
            flat[i] = orig - step
            f_minus = float(forward(root, feeds64, dtype=np.float64))
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NonFiniteError(f"non-finite output perturbing {leaf}[{i}]")
            num_flat[i] = (f_plus - f_minus) / (2 * step)
    finally:
        forward(root, feeds64, dtype=np.float64)

    rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    max_rel = float(rel.max()) if rel.size else 0.0
    return GradCheckReport(leaf, max_rel, max_rel <= tolerance, analytic, numeric)
