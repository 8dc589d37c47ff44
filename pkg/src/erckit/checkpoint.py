"""Binary checkpoint format (little-endian).

    b"MDIC" | u32 version | u32 config_len | config JSON (UTF-8, sorted keys)
    u32 n_params
    per parameter, in model-definition order:
        u32 name_len | name UTF-8 | u32 rank | rank x u32 dims | float32 payload
"""
from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .model import ModelConfig, build_model

MAGIC = b"MDIC"
VERSION = 1


def dumps_checkpoint(model) -> bytes:
    buf = io.BytesIO()
    cfg = json.dumps(model.config.to_record(), sort_keys=True, separators=(",", ":")).encode()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(cfg)))
    buf.write(cfg)
    params = model.parameters()
    buf.write(struct.pack("<I", len(params)))
    for p in params:
        name = p.name.encode()
        buf.write(struct.pack("<I", len(name)))
        buf.write(name)
        buf.write(struct.pack(f"<I{p.data.ndim}I", p.data.ndim, *p.data.shape))
        buf.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    return buf.getvalue()


def save_checkpoint(model, path) -> None:
    Path(path).write_bytes(dumps_checkpoint(model))


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data, self.pos, self.source = data, 0, source

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"{self.source}: truncated at byte {self.pos} (wanted {n} bytes)")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def loads_checkpoint(data: bytes, source: str = "<checkpoint>"):
    r = _Reader(data, source)
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{source}: bad magic, not a checkpoint")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{source}: unsupported version {version}")
    try:
        config = ModelConfig.from_record(json.loads(r.take(r.u32()).decode()))
    except (ValueError, TypeError) as e:
        raise CheckpointError(f"{source}: bad config record ({e})") from None
    model = build_model(config)
    params = model.parameters()
    n = r.u32()
    if n != len(params):
        raise CheckpointError(f"{source}: {n} parameters stored, model defines {len(params)}")
    for p in params:
        name = r.take(r.u32()).decode()
        rank = r.u32()
        shape = tuple(r.u32() for _ in range(rank))
        if name != p.name or shape != p.data.shape:
            raise CheckpointError(f"{source}: parameter {name}{shape} does not match "
                                  f"{p.name}{p.data.shape}")
        count = int(np.prod(shape, dtype=np.int64))
        p.data = np.frombuffer(r.take(4 * count), dtype="<f4").astype(np.float64).reshape(shape)
        p.zero_grad()
    if r.pos != len(data):
        raise CheckpointError(f"{source}: {len(data) - r.pos} trailing bytes")
    return model


def load_checkpoint(path):
    path = Path(path)
    return loads_checkpoint(path.read_bytes(), str(path))
