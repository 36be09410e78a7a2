"""Binary checkpoints: named float64 blocks, normalisation stats, config snapshot, sha256.

Layout (little-endian)::

    b"ACANET1" | u32 version | u32 meta_len | meta JSON
    u32 n_blocks | per block: u32 name_len, name, u32 ndim, u32 dims..., f64 data
    sha256 of everything above (32 bytes)
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .nn import Params
from .training import NormalizationStats

MAGIC = b"ACANET1"
VERSION = 1
NON_TRAINABLE = ("out_scale", "head.scale")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    blocks: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def group(self, prefix: str) -> dict[str, np.ndarray]:
        cut = len(prefix) + 1
        return {k[cut:]: v for k, v in self.blocks.items() if k.startswith(prefix + ".")}

    def params(self, prefix: str) -> Params:
        return params_from_arrays(self.group(prefix))

    def stats(self) -> NormalizationStats | None:
        g = self.group("stats")
        return NormalizationStats.from_arrays(g) if g else None

    @property
    def config(self) -> dict:
        return self.meta.get("config", {})


def params_from_arrays(arrays: dict[str, np.ndarray]) -> Params:
    return {k: Tensor(v.copy(), requires_grad=k not in NON_TRAINABLE, name=k) for k, v in arrays.items()}


def build(model: Params | None = None, sim: Params | None = None, stats: NormalizationStats | None = None,
          config: dict | None = None, **meta) -> Checkpoint:
    blocks: dict[str, np.ndarray] = {}
    for prefix, params in (("model", model), ("sim", sim)):
        for k, t in sorted((params or {}).items()):
            blocks[f"{prefix}.{k}"] = np.asarray(t.data, dtype=np.float64)
    if stats is not None:
        for k, v in stats.as_arrays().items():
            blocks[f"stats.{k}"] = v
    return Checkpoint(blocks, {"config": config or {}, **meta})


def dumps(ck: Checkpoint) -> bytes:
    meta = json.dumps(ck.meta, sort_keys=True).encode("utf-8")
    out = bytearray(MAGIC)
    out += struct.pack("<II", VERSION, len(meta)) + meta
    out += struct.pack("<I", len(ck.blocks))
    for name in sorted(ck.blocks):
        arr = np.asarray(ck.blocks[name], dtype="<f8")
        raw = name.encode("utf-8")
        out += struct.pack("<I", len(raw)) + raw
        out += struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape)
        out += arr.tobytes()
    out += hashlib.sha256(out).digest()
    return bytes(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("checkpoint is truncated")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, count: int = 1):
        vals = struct.unpack(f"<{count}I", self.take(4 * count))
        return vals[0] if count == 1 else vals


def loads(buf: bytes) -> Checkpoint:
    if not buf.startswith(MAGIC):
        raise CheckpointError("not a checkpoint (bad magic)")
    if len(buf) < len(MAGIC) + 32:
        raise CheckpointError("checkpoint is truncated")
    body, digest = buf[:-32], buf[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checksum mismatch: checkpoint is corrupted")
    r = _Reader(body)
    r.take(len(MAGIC))
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    meta = json.loads(r.take(r.u32()).decode("utf-8"))
    blocks = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        ndim = r.u32()
        shape = tuple(r.u32(ndim)) if ndim > 1 else ((r.u32(),) if ndim == 1 else ())
        n = int(np.prod(shape)) if shape else 1
        blocks[name] = np.frombuffer(r.take(8 * n), dtype="<f8").reshape(shape).astype(np.float64)
    if r.pos != len(body):
        raise CheckpointError("trailing bytes after the last block")
    return Checkpoint(blocks, meta)


def save(path, ck: Checkpoint) -> None:
    Path(path).write_bytes(dumps(ck))


def load(path) -> Checkpoint:
    return loads(Path(path).read_bytes())
