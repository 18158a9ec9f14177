"""Binary parameter checkpoints.

Layout (little-endian)::

    magic      8 bytes  b"FEDGATPM"
    version    u8       1
    count      u32      number of tensors
    per tensor:
        name_len u16, name utf-8, ndim u8, dims u32 * ndim
    payload    f64 * total, tensors concatenated in header order
"""

from __future__ import annotations

import os
import struct

import numpy as np

from ..autodiff import ParamStore, SchemaError

MAGIC = b"FEDGATPM"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode(params: ParamStore) -> bytes:
    parts = [MAGIC, struct.pack("<BI", VERSION, len(params))]
    for name, shape in params.schema():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack(f"<B{len(shape)}I", len(shape), *shape))
    parts.append(params.flatten().astype("<f8").tobytes())
    return b"".join(parts)


def decode(blob: bytes) -> ParamStore:
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a parameter checkpoint (bad magic)")
    pos = len(MAGIC)
    try:
        version, count = struct.unpack_from("<BI", blob, pos)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        pos += 5
        schema = []
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            schema.append((name, tuple(shape)))
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint header: {exc}") from exc
    if (len(blob) - pos) % 8:
        raise CheckpointError("truncated checkpoint payload")
    payload = np.frombuffer(blob, dtype="<f8", offset=pos)
    try:
        return ParamStore.from_flat(schema, payload.astype(np.float64))
    except SchemaError as exc:
        raise CheckpointError(f"checkpoint payload does not match its header: {exc}") from exc


def save_checkpoint(params: ParamStore, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(params))


def load_checkpoint(path: str | os.PathLike) -> ParamStore:
    with open(path, "rb") as fh:
        return decode(fh.read())
