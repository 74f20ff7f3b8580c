"""Loss graphs for the vanilla GAN, the O-GAN variants and the MSE ablation.

Each builder takes callables mapping graph nodes to graph nodes (``E``, ``G``,
optionally ``T``) and the input placeholders, and returns a :class:`LossBundle`.

In the encoder objective the generated batch enters through ``stop_gradient``,
so ``loss_E`` carries no gradient into the generator's weights; ``loss_G`` is
built on the un-stopped batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

from . import ndnum as nd
from . import ortho

Net = Callable[[nd.Node], nd.Node]

KINDS = ("vanilla", "ogan-with-T", "ogan-simplest", "ablation-mse")


@dataclass(frozen=True)
class ObjectiveVariant:
    kind: str = "ogan-simplest"
    lambda1: float = 0.125
    lambda2: float = 0.5
    eps_r: float = 1e-8
    rho_eps: float = ortho.DEFAULT_EPS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}; choose from {KINDS}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be non-negative")

    @classmethod
    def default(cls, n_x: int, kind: str = "ogan-simplest") -> "ObjectiveVariant":
        return cls(kind=kind, lambda1=0.25 / n_x, lambda2=0.5)


@dataclass
class LossBundle:
    loss_E: nd.Node
    loss_G: nd.Node
    diagnostics: Dict[str, nd.Node] = field(default_factory=dict)


def avg_head(codes: nd.Node) -> nd.Node:
    """Score a code by its mean: the discriminator without a separate head."""
    return ortho.avg(codes)


def mlp_head(net: Net) -> Net:
    """Turn a net with a single output unit into a per-row score."""
    return lambda codes: nd.reduce_sum(net(codes), axis=-1)


def rho_term(z: nd.Node, codes: nd.Node, eps: float = ortho.DEFAULT_EPS) -> nd.Node:
    """Batch mean of the row-wise Pearson correlation between ``z`` and ``codes``."""
    return nd.reduce_mean(ortho.pearson(z, codes, eps=eps))


def regularizer_R(score_real: nd.Node, score_fake: nd.Node, x: nd.Node, gx: nd.Node,
                  eps_r: float = 1e-8) -> nd.Node:
    """Mean over paired rows of (s_real - s_fake)^2 / (||x - G(z)||^2 + eps_r)."""
    gap = nd.square(score_real - score_fake)
    dist = nd.reduce_sum(nd.square(x - gx), axis=-1)
    return nd.reduce_mean(gap / (dist + eps_r))


def _adversarial_parts(E: Net, T: Net, G: Net, x: nd.Node, z: nd.Node):
    fake = G(z)
    fake_fixed = nd.stop_gradient(fake)
    codes_real = E(x)
    codes_fake = E(fake_fixed)
    codes_fake_g = E(fake)
    return {
        "fake": fake,
        "fake_fixed": fake_fixed,
        "codes_real": codes_real,
        "codes_fake": codes_fake,
        "codes_fake_g": codes_fake_g,
        "s_real": T(codes_real),
        "s_fake": T(codes_fake),
        "s_fake_g": T(codes_fake_g),
    }


def _diagnostics(p, extra: Dict[str, nd.Node]) -> Dict[str, nd.Node]:
    out = {
        "score_real": nd.reduce_mean(p["s_real"]),
        "score_fake": nd.reduce_mean(p["s_fake"]),
        "std_code_real": nd.reduce_mean(ortho.std(p["codes_real"])),
    }
    out.update(extra)
    return out


def vanilla_losses(E: Net, T: Optional[Net], G: Net, x: nd.Node, z: nd.Node) -> LossBundle:
    """Softplus GAN with discriminator T(E(.)); T defaults to the mean of the code."""
    p = _adversarial_parts(E, T or avg_head, G, x, z)
    loss_D = nd.reduce_mean(nd.softplus(-p["s_real"]) + nd.softplus(p["s_fake"]))
    loss_G = nd.reduce_mean(nd.softplus(-p["s_fake_g"]))
    return LossBundle(loss_D, loss_G, _diagnostics(p, {}))


def ogan_withT_losses(E: Net, T: Net, G: Net, x: nd.Node, z: nd.Node,
                      variant: ObjectiveVariant) -> LossBundle:
    """Linear critic scores T(E(.)) plus the correlation term on both players."""
    p = _adversarial_parts(E, T, G, x, z)
    rho_E = rho_term(z, p["codes_fake"], variant.rho_eps)
    rho_G = rho_term(z, p["codes_fake_g"], variant.rho_eps)
    R = regularizer_R(p["s_real"], p["s_fake"], x, p["fake_fixed"], variant.eps_r)
    adversarial = nd.reduce_mean(p["s_real"]) - nd.reduce_mean(p["s_fake"])
    loss_E = adversarial + variant.lambda1 * R - variant.lambda2 * rho_E
    loss_G = nd.reduce_mean(p["s_fake_g"]) - variant.lambda2 * rho_G
    return LossBundle(loss_E, loss_G,
                      _diagnostics(p, {"rho": rho_E, "R": R, "adversarial": adversarial}))


def ogan_simplest_losses(E: Net, G: Net, x: nd.Node, z: nd.Node,
                         variant: ObjectiveVariant) -> LossBundle:
    """The objective actually trained: avg(E(.)) is the critic score."""
    return ogan_withT_losses(E, avg_head, G, x, z, variant)


def ablation_mse_losses(E: Net, G: Net, x: nd.Node, z: nd.Node,
                        variant: ObjectiveVariant) -> LossBundle:
    """As ogan_simplest_losses, with lambda2 * ||z - E(G(z))||^2 / n_z instead of -lambda2 * rho."""
    p = _adversarial_parts(E, avg_head, G, x, z)
    mse_E = nd.reduce_mean(nd.square(z - p["codes_fake"]))
    mse_G = nd.reduce_mean(nd.square(z - p["codes_fake_g"]))
    R = regularizer_R(p["s_real"], p["s_fake"], x, p["fake_fixed"], variant.eps_r)
    adversarial = nd.reduce_mean(p["s_real"]) - nd.reduce_mean(p["s_fake"])
    loss_E = adversarial + variant.lambda1 * R + variant.lambda2 * mse_E
    loss_G = nd.reduce_mean(p["s_fake_g"]) + variant.lambda2 * mse_G
    rho = rho_term(z, p["codes_fake"], variant.rho_eps)
    return LossBundle(loss_E, loss_G, _diagnostics(
        p, {"rho": rho, "R": R, "mse": mse_E, "adversarial": adversarial}))


def build_losses(variant: ObjectiveVariant, E: Net, G: Net, x: nd.Node, z: nd.Node,
                 T: Optional[Net] = None) -> LossBundle:
    if variant.kind == "vanilla":
        bundle = vanilla_losses(E, T, G, x, z)
    elif variant.kind == "ogan-with-T":
        if T is None:
            raise ValueError("ogan-with-T needs a T head")
        bundle = ogan_withT_losses(E, T, G, x, z, variant)
    elif variant.kind == "ogan-simplest":
        bundle = ogan_simplest_losses(E, G, x, z, variant)
    else:
        bundle = ablation_mse_losses(E, G, x, z, variant)
    return bundle
