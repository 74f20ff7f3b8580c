"""Synthetic 2-D distributions with known structure, plus a flat image-file format.

Every sampler draws from an explicit :class:`~ogan.ndnum.Rng` and clips its
output to [-1, 1], the range of the generator's tanh head.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ndnum import Rng

KINDS = ("gaussian-mixture", "ring", "checkerboard", "binary-image-file")

IMAGE_MAGIC = b"OIMG"
IMAGE_VERSION = 1
_IMAGE_HEADER = struct.Struct("<4sIIHHB")


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "gaussian-mixture"
    n_modes: int = 8
    mode_std: float = 0.05
    radius: float = 0.7
    grid: int = 4
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}; choose from {KINDS}")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.mode_std < 0:
            raise ValueError("mode_std must be >= 0")
        if self.kind == "binary-image-file" and not self.path:
            raise ValueError("binary-image-file datasets need a path")


@dataclass
class Batch:
    x: np.ndarray
    labels: Optional[np.ndarray] = None


def sample_prior(rng: Rng, batch: int, n_z: int) -> np.ndarray:
    """i.i.d. standard normal latent codes, [batch, n_z] float32."""
    return rng.normal((batch, n_z))


def mode_centers(spec: DatasetSpec) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(spec.n_modes) / spec.n_modes
    return np.stack([spec.radius * np.cos(angles), spec.radius * np.sin(angles)], axis=1)


def sample_mixture(spec: DatasetSpec, rng: Rng, batch: int) -> Batch:
    """Equal-weight Gaussian modes on a circle; labels give the source mode."""
    labels = rng.integers(spec.n_modes, batch)
    noise = rng.normal((batch, 2), dtype=np.float64)
    x = mode_centers(spec)[labels] + spec.mode_std * noise
    return Batch(np.clip(x, -1.0, 1.0).astype(np.float32), labels)


def sample_ring(spec: DatasetSpec, rng: Rng, batch: int) -> Batch:
    angle = 2.0 * np.pi * rng.uniform(batch)
    r = spec.radius + spec.mode_std * rng.normal(batch, dtype=np.float64)
    x = np.stack([r * np.cos(angle), r * np.sin(angle)], axis=1)
    return Batch(np.clip(x, -1.0, 1.0).astype(np.float32))


def sample_checkerboard(spec: DatasetSpec, rng: Rng, batch: int) -> Batch:
    """Uniform points on the dark squares of a ``grid`` x ``grid`` board over [-1, 1]^2."""
    n = spec.grid
    dark = np.array([(i, j) for i in range(n) for j in range(n) if (i + j) % 2 == 0])
    labels = rng.integers(len(dark), batch)
    offset = rng.uniform(2 * batch).reshape(batch, 2)
    cell = 2.0 / n
    x = -1.0 + (dark[labels] + offset) * cell
    return Batch(np.clip(x, -1.0, 1.0).astype(np.float32), labels)


def write_image_file(path, pixels: np.ndarray) -> None:
    """Store uint8 images shaped [N, H, W, C] in the flat OIMG format."""
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8 or pixels.ndim != 4:
        raise ValueError("pixels must be a uint8 array shaped [N, H, W, C]")
    n, h, w, c = pixels.shape
    with open(path, "wb") as fh:
        fh.write(_IMAGE_HEADER.pack(IMAGE_MAGIC, IMAGE_VERSION, n, h, w, c))
        fh.write(np.ascontiguousarray(pixels).tobytes())


def read_image_file(path) -> np.ndarray:
    """Raw uint8 pixels [N, H, W, C] from an OIMG file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _IMAGE_HEADER.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, n, h, w, c = _IMAGE_HEADER.unpack_from(blob)
    if magic != IMAGE_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != IMAGE_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    expected = n * h * w * c
    body = blob[_IMAGE_HEADER.size:]
    if len(body) != expected:
        raise DataFormatError(f"{path}: expected {expected} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(n, h, w, c)


def load_image_file(path) -> np.ndarray:
    """Flattened images [N, H*W*C] mapped from [0, 255] to [-1, 1]."""
    pixels = read_image_file(path)
    flat = pixels.reshape(pixels.shape[0], -1).astype(np.float32)
    return flat / np.float32(127.5) - np.float32(1.0)


class Dataset:
    """Uniform front end over the samplers; image files are sampled row-wise with replacement."""

    def __init__(self, spec: DatasetSpec):
        self.spec = spec
        self._images = None
        if spec.kind == "binary-image-file":
            if not os.path.exists(spec.path):
                raise FileNotFoundError(spec.path)
            self._images = load_image_file(spec.path)
            if len(self._images) == 0:
                raise DataFormatError(f"{spec.path}: no images")

    @property
    def n_x(self) -> int:
        return 2 if self._images is None else self._images.shape[1]

    def sample(self, rng: Rng, batch: int) -> Batch:
        kind = self.spec.kind
        if kind == "gaussian-mixture":
            return sample_mixture(self.spec, rng, batch)
        if kind == "ring":
            return sample_ring(self.spec, rng, batch)
        if kind == "checkerboard":
            return sample_checkerboard(self.spec, rng, batch)
        idx = rng.integers(len(self._images), batch)
        return Batch(self._images[idx], idx)
