"""Counter-based random numbers.

Draw ``i`` of a stream is a pure function of ``(seed, i)``: the SplitMix64
finaliser applied to ``mix(seed) + i * golden``. The whole generator state is
therefore two unsigned 64-bit integers, and independent named streams are
derived with :meth:`Rng.split` without touching the parent.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix_int(x: int) -> int:
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _mix_array(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _label_bits(label) -> int:
    digest = hashlib.blake2b(repr(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class Rng:
    """Deterministic stream of 64-bit draws identified by ``seed``.

    ``counter`` is the index of the next draw; ``state`` round-trips through
    checkpoints as ``(seed, counter)``.
    """

    def __init__(self, seed: int, counter: int = 0):
        if not 0 <= seed <= _MASK:
            raise ValueError(f"seed must fit in 64 bits, got {seed}")
        self.seed = int(seed)
        self.counter = int(counter)
        self._key = _mix_int(self.seed + _GOLDEN)

    @property
    def state(self) -> tuple:
        return (self.seed, self.counter)

    @classmethod
    def from_state(cls, state) -> "Rng":
        seed, counter = state
        return cls(seed, counter)

    def split(self, *labels) -> "Rng":
        """Independent child stream; the parent's counter is not advanced."""
        child = self.seed
        for label in labels:
            child = _mix_int(child ^ _label_bits(label)) + _GOLDEN
        return Rng(child & _MASK)

    def raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        return _mix_array(np.uint64(self._key) + idx * np.uint64(_GOLDEN))

    def uniform(self, n: int) -> np.ndarray:
        """``n`` float64 draws in [0, 1) with 53 random bits each."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def normal(self, shape, dtype=np.float32) -> np.ndarray:
        """Standard normal draws via Box-Muller, two per uniform pair."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = math.prod(shape)
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        radius = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
        angle = 2.0 * np.pi * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:n].reshape(shape).astype(dtype)

    def integers(self, high: int, n: int) -> np.ndarray:
        return np.floor(self.uniform(n) * high).astype(np.int64)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, counter={self.counter})"
