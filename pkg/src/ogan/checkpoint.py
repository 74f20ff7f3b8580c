"""Binary checkpoint container.

Layout (little-endian)::

    b"OGAN" | u32 version=1 | u64 iteration | u32 tensor_count
    per tensor: u16 name_len | name (utf-8) | u8 ndim | u32 dims[ndim] | f32 data
    u64 rng_seed | u64 rng_counter
    u32 config_len | config (utf-8 json)
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

MAGIC = b"OGAN"
VERSION = 1


class CheckpointError(Exception):
    def __init__(self, path, reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{path}: {reason}")


@dataclass
class Checkpoint:
    iteration: int
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)
    rng_state: Tuple[int, int] = (0, 0)
    config_json: str = "{}"

    def __eq__(self, other):
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return (self.iteration == other.iteration
                and tuple(self.rng_state) == tuple(other.rng_state)
                and self.config_json == other.config_json
                and list(self.tensors) == list(other.tensors)
                and all(a.shape == b.shape and a.tobytes() == b.tobytes()
                        for a, b in zip(self.tensors.values(), other.tensors.values())))


def encode(ckpt: Checkpoint) -> bytes:
    parts = [MAGIC, struct.pack("<IQI", VERSION, ckpt.iteration, len(ckpt.tensors))]
    for name, arr in ckpt.tensors.items():
        raw_name = name.encode("utf-8")
        arr = np.asarray(arr, dtype="<f4")  # tobytes() below is C order; keeps 0-d shapes
        parts.append(struct.pack("<H", len(raw_name)) + raw_name)
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    parts.append(struct.pack("<QQ", *ckpt.rng_state))
    raw_cfg = ckpt.config_json.encode("utf-8")
    parts.append(struct.pack("<I", len(raw_cfg)) + raw_cfg)
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob, self.pos, self.path = blob, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError(self.path, f"truncated at byte {self.pos} (wanted {n} more)")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode(blob: bytes, path="<bytes>") -> Checkpoint:
    r = _Reader(blob, path)
    magic = r.take(4)
    if magic != MAGIC:
        raise CheckpointError(path, f"bad magic {magic!r}")
    (version,) = r.unpack("I")
    if version != VERSION:
        raise CheckpointError(path, f"unsupported version {version}")
    iteration, count = r.unpack("QI")
    tensors = {}
    for _ in range(count):
        (name_len,) = r.unpack("H")
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError(path, "tensor name is not utf-8") from None
        (ndim,) = r.unpack("B")
        dims = r.unpack(f"{ndim}I") if ndim else ()
        size = int(np.prod(dims, dtype=np.int64)) if dims else 1
        data = np.frombuffer(r.take(4 * size), dtype="<f4").astype(np.float32)
        tensors[name] = data.reshape(dims)
    rng_state = r.unpack("QQ")
    (cfg_len,) = r.unpack("I")
    try:
        config_json = r.take(cfg_len).decode("utf-8")
    except UnicodeDecodeError:
        raise CheckpointError(path, "config snapshot is not utf-8") from None
    if r.pos != len(blob):
        raise CheckpointError(path, f"{len(blob) - r.pos} trailing bytes")
    return Checkpoint(iteration, tensors, tuple(rng_state), config_json)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write atomically: a temp file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    blob = encode(ckpt)
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ckpt-", suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except OSError as exc:
        raise CheckpointError(path, f"write failed: {exc.strerror or exc}") from exc


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(path, f"read failed: {exc.strerror or exc}") from exc
    return decode(blob, path)
