"""Training configuration: one flat JSON document."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import List, Optional

from .data import DatasetSpec
from .nets import NetSpec, encoder_spec, generator_spec
from .objectives import ObjectiveVariant

# command-line spellings -> objective kinds
VARIANTS = {
    "vanilla": "vanilla",
    "ogan": "ogan-simplest",
    "ogan-T": "ogan-with-T",
    "mse": "ablation-mse",
}


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    variant: str = "ogan"
    lambda1: Optional[float] = None  # None -> 0.25 / n_x
    lambda2: float = 0.5
    eps_r: float = 1e-8
    n_z: int = 8
    g_hidden: List[int] = field(default_factory=lambda: [64, 64])
    e_hidden: List[int] = field(default_factory=lambda: [64, 64])
    t_hidden: List[int] = field(default_factory=lambda: [16])
    batch_size: int = 128
    iterations: int = 10_000
    learning_rate: float = 1e-4
    rms_decay: float = 0.99
    rms_eps: float = 1e-8
    fresh_z_for_g: bool = True
    seed: int = 42
    dataset: str = "gaussian-mixture"
    n_modes: int = 8
    mode_std: float = 0.05
    radius: float = 0.7
    grid: int = 4
    image_path: Optional[str] = None
    log_every: int = 10
    checkpoint_every: int = 1000
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.variant in VARIANTS.values():
            self.variant = next(k for k, v in VARIANTS.items() if v == self.variant)
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0 < self.rms_decay < 1:
            raise ConfigError("rms_decay must lie in (0, 1)")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.log_every < 1 or self.checkpoint_every < 1:
            raise ConfigError("log_every and checkpoint_every must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.n_z < 3 and self.variant != "vanilla":
            raise ConfigError("n_z must be >= 3 for the correlation loss")
        self.g_hidden = [int(h) for h in self.g_hidden]
        self.e_hidden = [int(h) for h in self.e_hidden]
        self.t_hidden = [int(h) for h in self.t_hidden]

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    # derived pieces

    def dataset_spec(self) -> DatasetSpec:
        kind = "binary-image-file" if self.dataset in ("image", "binary-image-file") else self.dataset
        return DatasetSpec(kind=kind, n_modes=self.n_modes, mode_std=self.mode_std,
                           radius=self.radius, grid=self.grid, path=self.image_path)

    def objective(self, n_x: int) -> ObjectiveVariant:
        lambda1 = 0.25 / n_x if self.lambda1 is None else self.lambda1
        return ObjectiveVariant(VARIANTS[self.variant], lambda1, self.lambda2, self.eps_r)

    def generator_spec(self, n_x: int) -> NetSpec:
        return generator_spec(self.n_z, n_x, self.g_hidden, self.seed)

    def encoder_spec(self, n_x: int) -> NetSpec:
        return encoder_spec(n_x, self.n_z, self.e_hidden, self.seed)

    def head_spec(self) -> Optional[NetSpec]:
        if self.variant != "ogan-T":
            return None
        return NetSpec(self.n_z, tuple(self.t_hidden), 1, "leaky_relu", "linear",
                       init_seed=self.seed)
