"""Writer (and a verifying reader) for the engine's vector file format.

Byte layout, all integers little-endian:

    magic "LFVE" | version u32 (=1) | dim u32 | entry_count u32
    per entry: id_len u16 | id utf-8 | N u32 | N*dim float32

This module implements the format from its published byte contract;
it does not depend on the retrieval engine package.
"""

from __future__ import annotations

import io
import os
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ExportError

MAGIC = b"LFVE"
VERSION = 1


def write_vector_file(entries: Mapping[str, np.ndarray], path: str | Path) -> None:
    """Serialize id -> N x D float32 matrices; atomic via temp rename."""
    path = Path(path)
    ids = sorted(entries)
    dim: int | None = None
    for eid in ids:
        m = np.asarray(entries[eid])
        if m.ndim != 2 or m.shape[0] < 1:
            raise ExportError(f"entry {eid!r} must be a non-empty 2-D matrix")
        if dim is None:
            dim = int(m.shape[1])
        elif m.shape[1] != dim:
            raise ExportError(
                f"entry {eid!r} has dimension {m.shape[1]}, expected {dim}"
            )
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<III", VERSION, dim or 0, len(ids)))
    for eid in ids:
        raw = eid.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ExportError(f"id too long: {eid[:40]!r}...")
        m = np.ascontiguousarray(entries[eid], dtype="<f4")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", m.shape[0]))
        buf.write(m.tobytes())
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def read_vector_file(path: str | Path) -> dict[str, np.ndarray]:
    """Strict reader used to self-check exports before handing them off."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ExportError(f"{path}: not a vector file")
        version, dim, count = struct.unpack("<III", fh.read(12))
        if version != VERSION:
            raise ExportError(f"{path}: unsupported version {version}")
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (id_len,) = struct.unpack("<H", fh.read(2))
            eid = fh.read(id_len).decode("utf-8")
            (n,) = struct.unpack("<I", fh.read(4))
            payload = fh.read(4 * n * dim)
            if len(payload) != 4 * n * dim:
                raise ExportError(f"{path}: truncated entry {eid!r}")
            out[eid] = np.frombuffer(payload, dtype="<f4").reshape(n, dim).copy()
        if fh.read(1):
            raise ExportError(f"{path}: trailing bytes")
    return out
