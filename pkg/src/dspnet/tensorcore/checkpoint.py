"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"DSPN"                      magic
    u32  format version (1)
    u64  parameter count
    repeated per parameter, in lexicographic name order:
        u32  name length in bytes
        ...  UTF-8 name
        u32  rank
        u64  extent, ``rank`` times
        f64  values, row-major
    u64  config length in bytes (0 when absent)
    ...  UTF-8 JSON configuration

Writing the result of reading a file reproduces it byte for byte.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import FormatError

MAGIC = b"DSPN"
VERSION = 1


def dumps(state: dict[str, np.ndarray], config: dict[str, Any] | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IQ", VERSION, len(state)))
    for name in sorted(state):
        arr = np.asarray(state[name], dtype="<f8")
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(arr.tobytes())
    blob = b"" if config is None else json.dumps(config, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<Q", len(blob)))
    buf.write(blob)
    return buf.getvalue()


def loads(data: bytes) -> tuple[dict[str, np.ndarray], dict[str, Any] | None]:
    view = memoryview(data)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise FormatError("checkpoint truncated")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise FormatError("bad checkpoint magic")
    version, count = struct.unpack("<IQ", take(12))
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    state: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        name = bytes(take(nlen)).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}Q", take(8 * rank))
        n = int(np.prod(shape)) if rank else 1
        values = np.frombuffer(bytes(take(8 * n)), dtype="<f8").astype(np.float64)
        state[name] = values.reshape(shape)
    (clen,) = struct.unpack("<Q", take(8))
    config = json.loads(bytes(take(clen)).decode("utf-8")) if clen else None
    if pos != len(view):
        raise FormatError("trailing bytes after checkpoint")
    return state, config


def save(path: str | Path, state: dict[str, np.ndarray], config: dict[str, Any] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(state, config))
    return path


def load(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, Any] | None]:
    return loads(Path(path).read_bytes())
