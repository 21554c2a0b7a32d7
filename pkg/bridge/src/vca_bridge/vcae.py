"""Independent reader/writer for the toolkit's VCAE embedding format.

This is deliberately a from-scratch implementation of the wire format
(magic "VCAE", u32 version=1, u32 dim, u64 count, then records of
{u32 id_len, UTF-8 id, dim x float32}, little-endian, ascending utt_id
order) so the cross-component golden-file tests compare two codebases.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import BridgeError

MAGIC = b"VCAE"
VERSION = 1

_HEADER = struct.Struct("<4sIIQ")
_U32 = struct.Struct("<I")


def write_vcae(entries: dict[str, np.ndarray], dim: int, path: str | Path) -> None:
    """Write embeddings in canonical (ascending utt_id) order, atomically."""
    if dim < 1:
        raise BridgeError(f"embedding dim must be >= 1, got {dim}")
    chunks = [_HEADER.pack(MAGIC, VERSION, dim, len(entries))]
    for utt_id in sorted(entries):
        vec = np.asarray(entries[utt_id], dtype=np.float32)
        if vec.shape != (dim,):
            raise BridgeError(f"vector for {utt_id!r} has shape {vec.shape}, expected ({dim},)")
        if not np.all(np.isfinite(vec)):
            raise BridgeError(f"vector for {utt_id!r} contains non-finite values")
        id_bytes = utt_id.encode("utf-8")
        chunks.append(_U32.pack(len(id_bytes)))
        chunks.append(id_bytes)
        chunks.append(vec.tobytes())
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(chunks))
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def read_vcae(path: str | Path) -> tuple[int, dict[str, np.ndarray]]:
    """Read a VCAE file; returns (dim, entries as float32 vectors)."""
    payload = Path(path).read_bytes()
    if len(payload) < _HEADER.size:
        raise BridgeError(f"{path}: truncated header")
    magic, version, dim, count = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise BridgeError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise BridgeError(f"{path}: unsupported version {version}")
    entries: dict[str, np.ndarray] = {}
    offset = _HEADER.size
    for i in range(count):
        if offset + 4 > len(payload):
            raise BridgeError(f"{path}: truncated at record {i}")
        (id_len,) = _U32.unpack_from(payload, offset)
        offset += 4
        if offset + id_len + 4 * dim > len(payload):
            raise BridgeError(f"{path}: truncated at record {i}")
        utt_id = payload[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(payload, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
        if utt_id in entries:
            raise BridgeError(f"{path}: duplicate utt_id {utt_id!r}")
        entries[utt_id] = vec
    if offset != len(payload):
        raise BridgeError(f"{path}: trailing bytes after declared count")
    return int(dim), entries
