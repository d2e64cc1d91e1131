"""Versioned binary checkpoint format.

Layout (all integers little-endian)::

    magic      8 bytes   b"S2PCKPT\\0"
    version    u32
    digest     32 bytes  sha256 of the canonical NetworkConfig JSON
    meta_len   u32, then meta_len bytes of UTF-8 JSON {"config": ..., "metadata": ...}
    n_blocks   u32
    n_blocks x (name_len u16, name, ndim u8, ndim x u64 dims, float64 data)
    crc32      u32 over every preceding byte
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .nn import ModelParameters, NetworkConfig

MAGIC = b"S2PCKPT\x00"
VERSION = 1


def dumps(params: ModelParameters) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION), params.config.digest()]
    meta = json.dumps({"config": params.config.to_dict(), "metadata": params.metadata}, sort_keys=True).encode()
    parts += [struct.pack("<I", len(meta)), meta, struct.pack("<I", len(params.arrays))]
    for name, arr in params.arrays.items():
        raw = name.encode()
        parts += [struct.pack("<H", len(raw)), raw, struct.pack("<B", arr.ndim)]
        parts += [struct.pack("<Q", d) for d in arr.shape]
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("checkpoint is truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]


def loads(buf: bytes) -> ModelParameters:
    if len(buf) < len(MAGIC) + 8 or buf[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    r = _Reader(buf)
    r.take(len(MAGIC))
    version = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    body, crc = buf[:-4], buf[-4:]
    if struct.unpack("<I", crc)[0] != zlib.crc32(body):
        raise CheckpointError("checkpoint is truncated or corrupt (checksum mismatch)")
    r = _Reader(body)
    r.take(len(MAGIC) + 4)
    digest = r.take(32)
    try:
        meta = json.loads(r.take(r.unpack("<I")).decode())
        config = NetworkConfig.from_dict(meta["config"])
    except (ValueError, KeyError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from None
    if config.digest() != digest:
        raise CheckpointError("config digest mismatch")
    arrays = {}
    for _ in range(r.unpack("<I")):
        name = r.take(r.unpack("<H")).decode()
        ndim = r.unpack("<B")
        shape = tuple(r.unpack("<Q") for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(body):
        raise CheckpointError("trailing bytes after the last parameter block")
    return ModelParameters(config, arrays, meta.get("metadata", {}))


def save_checkpoint(params: ModelParameters, path) -> None:
    Path(path).write_bytes(dumps(params))


def load_checkpoint(path) -> ModelParameters:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"{path}: {exc.strerror or exc}") from None
    return loads(buf)
