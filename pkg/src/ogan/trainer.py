"""Alternating encoder / generator optimisation with checkpoints and a metrics CSV."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import ndnum as nd
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .data import Dataset, sample_prior
from .nets import BoundNet, MlpParams, build_mlp
from .objectives import LossBundle, build_losses, mlp_head, rho_term
from .optim import OptState, rmsprop_step

log = logging.getLogger(__name__)

METRICS_HEADER = "iter,loss_E,loss_G,rho,score_real,score_fake,std_code_real"


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, what: str, last_good: Optional[str]):
        self.iteration = iteration
        self.last_good = last_good
        super().__init__(f"non-finite {what} at iteration {iteration}; "
                         f"last good checkpoint: {last_good or 'none'}")


@dataclass
class MetricsRow:
    iter: int
    loss_E: float
    loss_G: float
    rho: float
    score_real: float
    score_fake: float
    std_code_real: float

    def to_csv(self) -> str:
        vals = [str(self.iter)] + [f"{getattr(self, f.name):.9g}" for f in fields(self)[1:]]
        return ",".join(vals)


class TrainState:
    """Parameters, optimiser accumulators and the compiled loss graphs of one run."""

    def __init__(self, config: TrainConfig, G: MlpParams, E: MlpParams,
                 T: Optional[MlpParams] = None, opt_G: Optional[OptState] = None,
                 opt_E: Optional[OptState] = None, iteration: int = 0):
        self.config = config
        self.dataset = Dataset(config.dataset_spec())
        self.n_x = self.dataset.n_x
        self.variant = config.objective(self.n_x)
        self.G, self.E, self.T = G, E, T
        self.opt_G = opt_G or OptState.zeros_like(G.named("G"))
        self.opt_E = opt_E or OptState.zeros_like(self._critic_params())
        self.iteration = iteration
        self.rng = nd.Rng(config.seed)
        self._compile()

    def _compile(self) -> None:
        n_z = self.config.n_z
        self.x = nd.placeholder("x", (None, self.n_x))
        self.z = nd.placeholder("z", (None, n_z))
        self._g_net = BoundNet(self.G, "G")
        self._e_net = BoundNet(self.E, "E")
        T = None
        if self.T is not None:
            self._t_net = BoundNet(self.T, "T")
            T = mlp_head(self._t_net)
        self.bundle: LossBundle = build_losses(self.variant, self._e_net, self._g_net,
                                               self.x, self.z, T)
        diag = dict(self.bundle.diagnostics)
        if "rho" not in diag:
            diag["rho"] = rho_term(self.z, self._e_net(nd.stop_gradient(self._g_net(self.z))))
        self.diagnostics = diag

    def _critic_params(self) -> Dict[str, np.ndarray]:
        params = self.E.named("E")
        if self.T is not None:
            params.update(self.T.named("T"))
        return params

    def feeds(self, x: np.ndarray, z: np.ndarray) -> Dict[str, np.ndarray]:
        return {"x": x, "z": z, **self._critic_params(), **self.G.named("G")}

    def set_critic(self, arrays: Dict[str, np.ndarray]) -> None:
        self.E = self.E.replace("E", arrays)
        self._e_net.params = self.E
        if self.T is not None:
            self.T = self.T.replace("T", arrays)
            self._t_net.params = self.T

    def set_generator(self, arrays: Dict[str, np.ndarray]) -> None:
        self.G = self.G.replace("G", arrays)
        self._g_net.params = self.G

    # persistence

    def to_checkpoint(self) -> Checkpoint:
        tensors = {}
        tensors.update(self.G.named("G"))
        tensors.update(self._critic_params())
        tensors.update({f"opt.{k}": v for k, v in self.opt_G.accumulators.items()})
        tensors.update({f"opt.{k}": v for k, v in self.opt_E.accumulators.items()})
        return Checkpoint(self.iteration, tensors, self.rng.state, self.config.to_json())

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, config: Optional[TrainConfig] = None,
                        path="<checkpoint>") -> "TrainState":
        snapshot = TrainConfig.from_json(ckpt.config_json)
        config = config or snapshot
        fresh = init_state(config)
        t = ckpt.tensors

        def pick(params: MlpParams, prefix: str) -> MlpParams:
            wanted = params.named(prefix)
            missing = [k for k in wanted if k not in t]
            if missing:
                raise CheckpointError(path, f"missing tensors {missing}")
            try:
                return params.replace(prefix, {k: t[k] for k in wanted})
            except ValueError as exc:
                raise CheckpointError(path, f"resume shape mismatch: {exc}") from None

        G = pick(fresh.G, "G")
        E = pick(fresh.E, "E")
        T = pick(fresh.T, "T") if fresh.T is not None else None

        def opt(names, step) -> OptState:
            acc = {}
            for k in names:
                key = f"opt.{k}"
                if key not in t:
                    raise CheckpointError(path, f"missing optimiser tensor {key}")
                acc[k] = t[key]
            return OptState(acc, step)

        state = cls(config, G, E, T, iteration=ckpt.iteration)
        state.opt_G = opt(G.named("G"), ckpt.iteration)
        state.opt_E = opt(state._critic_params(), ckpt.iteration)
        state.rng = nd.Rng.from_state(ckpt.rng_state)
        return state


def init_state(config: TrainConfig) -> TrainState:
    dataset = Dataset(config.dataset_spec())
    n_x = dataset.n_x
    root = nd.Rng(config.seed)
    G = build_mlp(config.generator_spec(n_x), root.split("init", "G"))
    E = build_mlp(config.encoder_spec(n_x), root.split("init", "E"))
    head = config.head_spec()
    T = build_mlp(head, root.split("init", "T")) if head is not None else None
    return TrainState(config, G, E, T)


def e_step(state: TrainState, x: np.ndarray, z: np.ndarray) -> Dict[str, float]:
    """One critic update on loss_E; returns the pre-update loss and diagnostics."""
    diag_names = list(state.diagnostics)
    values = nd.forward([state.bundle.loss_E] + [state.diagnostics[k] for k in diag_names],
                        state.feeds(x, z))
    grads = nd.backward(state.bundle.loss_E)
    params = state._critic_params()
    new, state.opt_E = rmsprop_step(params, grads, state.opt_E, state.config.learning_rate,
                                    state.config.rms_decay, state.config.rms_eps)
    state.set_critic(new)
    out = {"loss_E": float(values[0])}
    out.update({k: float(v) for k, v in zip(diag_names, values[1:])})
    return out


def g_step(state: TrainState, x: np.ndarray, z: np.ndarray) -> float:
    """One generator update on loss_G; returns the pre-update loss."""
    loss = float(nd.forward(state.bundle.loss_G, state.feeds(x, z)))
    grads = nd.backward(state.bundle.loss_G)
    params = state.G.named("G")
    new, state.opt_G = rmsprop_step(params, grads, state.opt_G, state.config.learning_rate,
                                    state.config.rms_decay, state.config.rms_eps)
    state.set_generator(new)
    return loss


def train_step(state: TrainState, x: np.ndarray, z: np.ndarray,
               z_gen: Optional[np.ndarray] = None) -> MetricsRow:
    """One E update followed by one G update (on ``z_gen`` when given)."""
    diag = e_step(state, x, z)
    if not math.isfinite(diag["loss_E"]):
        raise FloatingPointError("loss_E")
    loss_G = g_step(state, x, z if z_gen is None else z_gen)
    state.iteration += 1
    return MetricsRow(state.iteration, diag["loss_E"], loss_G, diag["rho"],
                      diag["score_real"], diag["score_fake"], diag["std_code_real"])


def draw_batches(state: TrainState, iteration: int):
    """Data batch, critic latents and generator latents for a 1-based iteration."""
    cfg = state.config
    x = state.dataset.sample(state.rng.split("data", iteration), cfg.batch_size).x
    z = sample_prior(state.rng.split("prior", iteration), cfg.batch_size, cfg.n_z)
    z_gen = sample_prior(state.rng.split("prior-g", iteration), cfg.batch_size, cfg.n_z) \
        if cfg.fresh_z_for_g else None
    return x, z, z_gen


def _ckpt_path(out_dir: Path, iteration: int) -> Path:
    return out_dir / f"ckpt_{iteration:06d}.ogan"


def _prepare_metrics(path: Path, keep_until: int) -> None:
    """Start a fresh CSV, or keep only the rows up to ``keep_until`` when resuming."""
    lines = [METRICS_HEADER]
    if keep_until > 0 and path.exists():
        for line in path.read_text(encoding="utf-8").splitlines()[1:]:
            if line and not line.startswith("#") and int(line.split(",", 1)[0]) <= keep_until:
                lines.append(line)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def train_loop(config: TrainConfig, out_dir=None, resume: Optional[str] = None) -> Checkpoint:
    """Run ``config.iterations`` alternating steps, logging and checkpointing into ``out_dir``.

    With ``resume`` the run continues from that checkpoint; the continuation is
    bit-identical to an uninterrupted run because every batch is drawn from a
    stream keyed on (seed, iteration).
    """
    out_dir = Path(out_dir or config.out_dir or ".")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror}") from exc

    if resume is not None:
        state = TrainState.from_checkpoint(load_checkpoint(resume), config, path=resume)
        last_good = str(resume)
    else:
        state = init_state(config)
        last_good = str(_ckpt_path(out_dir, 0))
        save_checkpoint(state.to_checkpoint(), last_good)
        if config.iterations == 0:
            return state.to_checkpoint()

    metrics_path = out_dir / "metrics.csv"
    _prepare_metrics(metrics_path, state.iteration)
    with open(metrics_path, "a", encoding="utf-8", newline="\n") as metrics:
        while state.iteration < config.iterations:
            x, z, z_gen = draw_batches(state, state.iteration + 1)
            try:
                row = train_step(state, x, z, z_gen)
            except (FloatingPointError, nd.NonFiniteError) as exc:
                raise TrainingDiverged(state.iteration + 1, str(exc) or "value", last_good) from exc
            if not all(math.isfinite(v) for v in (row.loss_E, row.loss_G)):
                raise TrainingDiverged(row.iter, "loss", last_good)
            if row.iter % config.log_every == 0:
                metrics.write(row.to_csv() + "\n")
                metrics.flush()
            if row.iter % config.checkpoint_every == 0:
                last_good = str(_ckpt_path(out_dir, row.iter))
                save_checkpoint(state.to_checkpoint(), last_good)
                log.info("iter %d loss_E %.4f loss_G %.4f rho %.3f", row.iter, row.loss_E,
                         row.loss_G, row.rho)

    final = state.to_checkpoint()
    if state.iteration % config.checkpoint_every != 0:
        save_checkpoint(final, _ckpt_path(out_dir, state.iteration))
    save_checkpoint(final, out_dir / "final.ogan")
    return final


def read_metrics(path) -> List[Dict[str, float]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append({k: float(v) for k, v in zip(header, line.split(","))})
    return rows


def state_from_path(path) -> TrainState:
    return TrainState.from_checkpoint(load_checkpoint(path), path=path)


def config_from_checkpoint(ckpt: Checkpoint) -> TrainConfig:
    return TrainConfig.from_dict(json.loads(ckpt.config_json))
