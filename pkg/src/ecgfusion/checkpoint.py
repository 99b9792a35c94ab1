"""Binary checkpoint container for named float64 tensors.

Layout, all integers little-endian u32:

    magic b"XLEC" | version | n_meta
    n_meta * ( key_len | key utf-8 | value_len | value utf-8 )
    then parameter records until EOF:
    name_len | name utf-8 | rank | rank * dim | prod(dim) float64 payload

Values round-trip bit-exactly; metadata is a flat string-to-string map
(network and preprocessing settings live there so a checkpoint alone is
enough to rebuild the model).
"""

from __future__ import annotations

import struct
from typing import Mapping, Sequence

import numpy as np

MAGIC = b"XLEC"
VERSION = 1


class CheckpointError(Exception):
    pass


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save_checkpoint(path: str, tensors: Sequence[tuple[str, np.ndarray]],
                    metadata: Mapping[str, str] | None = None) -> None:
    metadata = dict(metadata or {})
    chunks = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(metadata))]
    for key, value in metadata.items():
        chunks.append(_pack_str(key))
        chunks.append(_pack_str(str(value)))
    seen: set[str] = set()
    for name, values in tensors:
        if name in seen:
            raise CheckpointError(f"duplicate tensor name {name!r}")
        seen.add(name)
        arr = np.ascontiguousarray(np.asarray(getattr(values, "data", values), dtype=np.float64))
        chunks.append(_pack_str(name))
        chunks.append(struct.pack("<I", arr.ndim))
        for dim in arr.shape:
            chunks.append(struct.pack("<I", dim))
        chunks.append(arr.astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise CheckpointError("truncated checkpoint")
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.raw)


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    with open(path, "rb") as fh:
        reader = _Reader(fh.read())
    if reader.take(4) != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    version = reader.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    metadata = {}
    for _ in range(reader.u32()):
        key = reader.string()
        metadata[key] = reader.string()
    tensors: dict[str, np.ndarray] = {}
    while not reader.exhausted:
        name = reader.string()
        rank = reader.u32()
        shape = tuple(reader.u32() for _ in range(rank))
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        payload = reader.take(8 * count)
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    return tensors, metadata
