"""The full gradient-check suite: every primitive, the correlation operators and
the loss graphs of each objective on 4-sample batches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from . import ndnum as nd
from . import ortho
from .nets import BoundNet, NetSpec, build_mlp, encoder_spec, generator_spec
from .objectives import KINDS, ObjectiveVariant, build_losses, mlp_head


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    passed: bool


def _kink_free(a: np.ndarray, margin: float = 0.05) -> np.ndarray:
    return np.where(np.abs(a) < margin, a + np.sign(a + 1e-12) * margin, a)


def _primitive_cases():
    """(name, builder over placeholders a[,b], input generator)."""

    def pair(s1, s2, fix=None):
        def gen(rng):
            a, b = rng.standard_normal(s1), rng.standard_normal(s2)
            return fix(a, b) if fix else (a, b)
        return gen

    def one(shape, fix=None):
        def gen(rng):
            a = rng.standard_normal(shape)
            return (fix(a) if fix else a,)
        return gen

    return [
        ("add", lambda a, b: a + b, pair((3, 4), (4,))),
        ("sub", lambda a, b: a - b, pair((3, 4), (3, 1))),
        ("mul", lambda a, b: a * b, pair((3, 4), (3, 4))),
        ("div", lambda a, b: a / b, pair((3, 4), (4,), lambda a, b: (a, np.sign(b) * (0.5 + abs(b))))),
        ("matmul", nd.matmul, pair((3, 4), (4, 2))),
        ("sum", lambda a: nd.reduce_sum(a, axis=1), one((3, 4))),
        ("mean", lambda a: nd.reduce_mean(a), one((3, 4))),
        ("square", nd.square, one((5,))),
        ("sqrt", nd.sqrt, one((5,), lambda a: 0.2 + abs(a))),
        ("exp", nd.exp, one((5,))),
        ("softplus", nd.softplus, one((5,))),
        ("relu", nd.relu, one((5,), _kink_free)),
        ("leaky_relu", nd.leaky_relu, one((5,), _kink_free)),
        ("tanh", nd.tanh, one((5,))),
        ("bias_add", nd.bias_add, pair((3, 4), (4,))),
        ("slice", lambda a: nd.slice_(a, 1, 3), one((3, 4))),
        ("concat", lambda a, b: nd.concat([a, b], axis=0), pair((2, 3), (1, 3))),
        ("pearson", lambda a, b: ortho.pearson(a, b), pair((8,), (8,))),
        ("normalize", lambda a: ortho.normalize(a), one((2, 6))),
        ("std", lambda a: ortho.std(a), one((2, 6))),
    ]


def check_primitives(tolerance: float = 1e-4, instances: int = 10, seed: int = 0) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for name, build, gen in _primitive_cases():
        worst = 0.0
        for _ in range(instances):
            arrays = gen(rng)
            names = ["a", "b"][: len(arrays)]
            out = build(*(nd.placeholder(k) for k in names))
            feeds = dict(zip(names, arrays))
            weights = rng.standard_normal(nd.forward(out, feeds, dtype=np.float64).shape)
            root = nd.reduce_sum(out * nd.const(weights))
            for k in names:
                worst = max(worst, nd.grad_check(root, k, feeds, 1e-3, tolerance).max_rel_err)
        results.append(CheckResult(f"primitive:{name}", worst, worst <= tolerance))
    return results


def loss_graph_setup(kind: str, seed: int = 0, batch: int = 4, n_x: int = 2, n_z: int = 8,
                     hidden=(16, 16)):
    """Small random nets, a 4-row batch and the LossBundle for ``kind``."""
    root_rng = nd.Rng(seed)
    G = build_mlp(generator_spec(n_z, n_x, hidden), root_rng.split("G"))
    E = build_mlp(encoder_spec(n_x, n_z, hidden), root_rng.split("E"))
    g_net, e_net = BoundNet(G, "G"), BoundNet(E, "E")
    T, t_net = None, None
    feeds = {**G.named("G"), **E.named("E")}
    if kind == "ogan-with-T":
        t_params = build_mlp(NetSpec(n_z, (8,), 1, "leaky_relu", "linear"), root_rng.split("T"))
        t_net = BoundNet(t_params, "T")
        T = mlp_head(t_net)
        feeds.update(t_params.named("T"))
    x = nd.placeholder("x", (None, n_x))
    z = nd.placeholder("z", (None, n_z))
    feeds["x"] = np.clip(root_rng.split("x").normal((batch, n_x)) * 0.5, -1, 1)
    feeds["z"] = root_rng.split("z").normal((batch, n_z))
    variant = ObjectiveVariant.default(n_x, kind)
    bundle = build_losses(variant, e_net, g_net, x, z, T)
    critic = list(E.named("E")) + (list(t_net.names) if t_net else [])
    return bundle, feeds, critic, list(G.named("G"))


def check_losses(tolerance: float = 1e-4, seed: int = 0, step: float = 1e-5) -> List[CheckResult]:
    # piecewise-linear activations: a 1e-3 nudge of an early bias moves every
    # downstream pre-activation and can cross a kink, so the nets use a smaller step
    results = []
    for kind in KINDS:
        bundle, feeds, critic, gen = loss_graph_setup(kind, seed)
        worst_e = max(nd.grad_check(bundle.loss_E, k, feeds, step, tolerance).max_rel_err
                      for k in critic)
        worst_g = max(nd.grad_check(bundle.loss_G, k, feeds, step, tolerance).max_rel_err
                      for k in gen)
        results.append(CheckResult(f"{kind}:loss_E", worst_e, worst_e <= tolerance))
        results.append(CheckResult(f"{kind}:loss_G", worst_g, worst_g <= tolerance))
    return results


def run_suite(tolerance: float = 1e-4, report: Callable[[str], None] = lambda s: None
              ) -> List[CheckResult]:
    results = check_primitives(tolerance) + check_losses(tolerance)
    for r in results:
        report(f"{'PASS' if r.passed else 'FAIL'} {r.name} max_rel_err={r.max_rel_err:.3e}")
    return results
