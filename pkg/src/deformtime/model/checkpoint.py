"""Flat binary checkpoint container.

Layout (little endian)::

    b"DFTCKPT\\0"  magic
    u32            format version
    u32 + bytes    model config as UTF-8 JSON
    u32 + bytes    free-form metadata as UTF-8 JSON
    u32            record count
    per record: u32 + bytes name, u32 ndim, ndim x u64 shape, float64 data

Loading reproduces every buffer bit for bit.
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from ..numerics import Tensor
from .config import ModelConfig
from .params import ParameterStore

MAGIC = b"DFTCKPT\0"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _blob(b: bytes) -> bytes:
    return struct.pack("<I", len(b)) + b


def dumps(cfg: ModelConfig, params: ParameterStore, meta: dict | None = None) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION), _blob(cfg.to_json().encode()),
             _blob(json.dumps(meta or {}, sort_keys=True).encode()), struct.pack("<I", len(params))]
    for name, t in params.items():
        arr = np.ascontiguousarray(t.data, dtype="<f8")
        parts.append(_blob(name.encode()))
        parts.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def loads(buf: bytes) -> tuple[ModelConfig, ParameterStore, dict]:
    view = memoryview(buf)
    pos = 0

    def read(n):
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated checkpoint")
        out = view[pos : pos + n]
        pos += n
        return out

    def u32():
        return struct.unpack("<I", read(4))[0]

    if bytes(read(len(MAGIC))) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version = u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    cfg = ModelConfig.from_dict(json.loads(bytes(read(u32())).decode()))
    meta = json.loads(bytes(read(u32())).decode())
    params = ParameterStore()
    for _ in range(u32()):
        name = bytes(read(u32())).decode()
        ndim = u32()
        shape = struct.unpack(f"<{ndim}Q", read(8 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(read(8 * count), dtype="<f8").reshape(shape).astype(np.float64)
        params[name] = Tensor(data, requires_grad=True, name=name)
    if pos != len(view):
        raise CheckpointError("trailing bytes after last record")
    return cfg, params, meta


def save_checkpoint(path, cfg: ModelConfig, params: ParameterStore, meta: dict | None = None) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(cfg, params, meta))
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[ModelConfig, ParameterStore, dict]:
    return loads(Path(path).read_bytes())
