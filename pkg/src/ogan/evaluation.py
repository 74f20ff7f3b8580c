"""Quantitative checks on trained networks.

Encoder quality (correlation of E(G(z)) with z), code statistics on real data,
mode coverage on labelled mixtures, the optimal-discriminator density-ratio
check for the vanilla objective, and the reconstruction / interpolation
procedures.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from . import ndnum as nd
from . import ortho
from .data import DatasetSpec, mode_centers, sample_prior
from .nets import BoundNet, MlpParams, build_mlp, enc_forward, encoder_spec, gen_forward
from .objectives import vanilla_losses
from .optim import OptState, rmsprop_step

Sampler = Callable[[nd.Rng, int], np.ndarray]


@dataclass
class EvalReport:
    recon_rho: float
    latent_avg: float
    latent_std: float
    modes_covered: Optional[int] = None
    n_modes: Optional[int] = None
    coverage_fractions: List[float] = field(default_factory=list)
    density_ratio_corr: Optional[float] = None

    def to_text(self) -> str:
        lines = []
        for key, value in asdict(self).items():
            if value is None:
                continue
            if isinstance(value, list):
                value = ";".join(f"{v:.6g}" for v in value)
            elif isinstance(value, float):
                value = f"{value:.9g}"
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    def to_csv_annotation(self) -> str:
        return "# eval " + " ".join(self.to_text().split()) + "\n"


def reconstruction(E: MlpParams, G: MlpParams, x: np.ndarray,
                   eps: float = ortho.DEFAULT_EPS) -> np.ndarray:
    """x_hat = G(normalize(E(x))): codes are standardised before decoding."""
    codes = enc_forward(E, x)
    return gen_forward(G, ortho.normalize(codes, eps=eps))


def recon_rho(E: MlpParams, G: MlpParams, rng: nd.Rng, M: int = 1000) -> float:
    """Mean correlation between fresh prior draws z and E(G(z))."""
    if M < 100:
        raise ValueError("recon_rho needs M >= 100")
    z = sample_prior(rng, M, G.input_dim)
    codes = enc_forward(E, gen_forward(G, z))
    return float(np.mean(ortho.pearson(z, codes)))


def latent_stats(E: MlpParams, x: np.ndarray) -> Tuple[float, float]:
    """(mean of row averages, mean of row standard deviations) of E(x)."""
    x = np.asarray(x)
    if len(x) == 0:
        raise ValueError("latent_stats needs a non-empty dataset")
    codes = enc_forward(E, x)
    return float(np.mean(ortho.avg(codes))), float(np.mean(ortho.std(codes)))


def coverage_of_points(points: np.ndarray, spec: DatasetSpec, threshold: float = 0.01,
                       n_sigma: float = 3.0) -> Tuple[int, np.ndarray]:
    """Share of points near each mode; a mode counts when its share reaches ``threshold``.

    A point is credited to its nearest centre only if it lies within
    ``n_sigma * mode_std`` of it.
    """
    centers = mode_centers(spec)
    points = np.asarray(points, dtype=np.float64)
    if len(points) == 0:
        return 0, np.zeros(len(centers))
    dist = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=-1)
    nearest = dist.argmin(axis=1)
    close = dist[np.arange(len(points)), nearest] <= n_sigma * spec.mode_std
    counts = np.bincount(nearest[close], minlength=len(centers))
    fractions = counts / len(points)
    return int(np.sum(fractions >= threshold)), fractions


def mode_coverage(G: Union[MlpParams, Sampler], spec: DatasetSpec, rng: nd.Rng, M: int = 10_000,
                  threshold: float = 0.01, n_sigma: float = 3.0) -> Tuple[int, np.ndarray]:
    """Modes covered by M generated samples; ``G`` may also be any ``(rng, M) -> points`` sampler."""
    if spec.kind != "gaussian-mixture":
        raise ValueError("mode coverage needs a labelled gaussian-mixture spec")
    if isinstance(G, MlpParams):
        points = gen_forward(G, sample_prior(rng, M, G.input_dim))
    else:
        points = G(rng, M)
    return coverage_of_points(points, spec, threshold, n_sigma)


@dataclass
class DensityRatioResult:
    corr: float
    degenerate: bool


def log_density_ratio(grid: np.ndarray, p: Tuple[float, float], q: Tuple[float, float]) -> np.ndarray:
    """log p(x) - log q(x) for two 1-D Gaussians given as (mean, std)."""
    (mp, sp), (mq, sq) = p, q
    return (np.log(sq / sp) - 0.5 * ((grid - mp) / sp) ** 2 + 0.5 * ((grid - mq) / sq) ** 2)


def density_ratio_check(D: Union[Callable[[np.ndarray], np.ndarray], np.ndarray],
                        p: Tuple[float, float] = (0.0, 1.0), q: Tuple[float, float] = (0.5, 1.0),
                        grid: Optional[np.ndarray] = None) -> DensityRatioResult:
    """Correlation between D on a grid and the closed-form log density ratio."""
    if grid is None:
        grid = np.linspace(-3.0, 3.0, 121)
    scores = np.asarray(D(grid) if callable(D) else D, dtype=np.float64).reshape(-1)
    target = log_density_ratio(grid, p, q)
    if np.ptp(scores) == 0 or np.ptp(target) == 0:
        return DensityRatioResult(0.0, True)
    return DensityRatioResult(float(ortho.pearson(scores, target, eps=0.0)), False)


def fit_optimal_discriminator(p=(0.0, 1.0), q=(0.5, 1.0), steps: int = 5000, batch: int = 256,
                              hidden=(32, 32), lr: float = 1e-3, seed: int = 0
                              ) -> Callable[[np.ndarray], np.ndarray]:
    """Train D = avg(E(.)) on the softplus objective with the generator frozen at q.

    Returns D as a function of a 1-D array of points.
    """
    root = nd.Rng(seed)
    E = build_mlp(encoder_spec(1, 1, hidden, seed), root.split("init", "D"))
    net = BoundNet(E, "E")
    x = nd.placeholder("x", (None, 1))
    fake = nd.placeholder("z", (None, 1))
    # the frozen generator is the identity on samples already drawn from q
    bundle = vanilla_losses(net, None, lambda v: v, x, fake)
    opt = OptState.zeros_like(E.named("E"))
    for t in range(1, steps + 1):
        xs = p[0] + p[1] * root.split("p", t).normal((batch, 1))
        qs = q[0] + q[1] * root.split("q", t).normal((batch, 1))
        nd.forward(bundle.loss_E, {"x": xs, "z": qs, **net.feeds()})
        grads = nd.backward(bundle.loss_E)
        new, opt = rmsprop_step(E.named("E"), grads, opt, lr)
        E = E.replace("E", new)
        net.params = E

    def D(points: np.ndarray) -> np.ndarray:
        codes = enc_forward(E, np.asarray(points, dtype=np.float32).reshape(-1, 1))
        return codes.mean(axis=1)

    return D


def interpolate(E: MlpParams, G: MlpParams, x_a: np.ndarray, x_b: np.ndarray, steps: int,
                eps: float = ortho.DEFAULT_EPS) -> np.ndarray:
    """Decode a straight line between the normalised codes of ``x_a`` and ``x_b``.

    Returns [steps, n_x]; the first and last rows are the reconstructions of the endpoints.
    """
    if steps < 2:
        raise ValueError("interpolate needs steps >= 2")
    ends = np.stack([np.asarray(x_a, np.float32).reshape(-1), np.asarray(x_b, np.float32).reshape(-1)])
    codes = ortho.normalize(enc_forward(E, ends), eps=eps)
    t = np.linspace(0.0, 1.0, steps, dtype=np.float32)[:, None]
    path = codes[0] + t * (codes[1] - codes[0])
    path[0], path[-1] = codes[0], codes[1]
    return gen_forward(G, path)


def evaluate_run(E: MlpParams, G: MlpParams, real: np.ndarray, spec: Optional[DatasetSpec],
                 rng: nd.Rng, M: int = 10_000, threshold: float = 0.01,
                 n_sigma: float = 3.0) -> EvalReport:
    rho = recon_rho(E, G, rng.split("recon-rho"), M)
    lat_avg, lat_std = latent_stats(E, real)
    report = EvalReport(rho, lat_avg, lat_std)
    if spec is not None and spec.kind == "gaussian-mixture":
        covered, fractions = mode_coverage(G, spec, rng.split("coverage"), M, threshold, n_sigma)
        report.modes_covered = covered
        report.n_modes = spec.n_modes
        report.coverage_fractions = [float(f) for f in fractions]
    return report
