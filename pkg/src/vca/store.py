"""Id-indexed embedding vectors and the VCAE binary file format.

VCAE layout, little-endian:

    magic   4 bytes  0x56 0x43 0x41 0x45 ("VCAE")
    version u32      = 1
    dim     u32
    count   u64
    count records of { id_len: u32; id: UTF-8 bytes; dim x float32 }

Vectors are float32 on disk. In memory they are held widened to float64
(always exact float32 widenings, so save/load round-trips bit-exactly) and
all similarity math downstream runs in 64-bit precision. Files are written
in ascending utt_id order, so serialization is a pure function of content.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import StoreError
from .records import atomic_write_bytes

VCAE_MAGIC = b"VCAE"
VCAE_VERSION = 1

_HEADER = struct.Struct("<4sIIQ")
_U32 = struct.Struct("<I")


class EmbeddingStore:
    """Immutable-by-convention map utt_id -> fixed-dimension vector.

    Mutation happens only during construction (single writer); after that
    the store is safe for shared concurrent reads.
    """

    def __init__(self, dim: int):
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
            raise StoreError(f"embedding dim must be a positive integer, got {dim!r}")
        self.dim = dim
        self._entries: dict[str, np.ndarray] = {}

    def add(self, utt_id: str, vector) -> None:
        if not isinstance(utt_id, str) or not utt_id:
            raise StoreError(f"utt_id must be a non-empty string, got {utt_id!r}")
        if utt_id in self._entries:
            raise StoreError(f"duplicate utt_id {utt_id!r} in store")
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise StoreError(
                f"vector for {utt_id!r} has shape {vec.shape}, expected ({self.dim},)"
            )
        if not np.all(np.isfinite(vec)):
            raise StoreError(f"vector for {utt_id!r} contains non-finite values")
        # Quantize to the on-disk float32 grid so round-trips are exact.
        self._entries[utt_id] = vec.astype(np.float32).astype(np.float64)

    def get(self, utt_id: str) -> np.ndarray:
        try:
            return self._entries[utt_id].copy()
        except KeyError:
            raise StoreError(f"unknown utt_id {utt_id!r} in store") from None

    def __contains__(self, utt_id: str) -> bool:
        return utt_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def ids(self) -> list[str]:
        """All ids in ascending order (the canonical order)."""
        return sorted(self._entries)

    def matrix(self, utt_ids: list[str]) -> np.ndarray:
        """Rows stacked in the given id order, float64."""
        missing = [u for u in utt_ids if u not in self._entries]
        if missing:
            raise StoreError(f"unknown utt_id {missing[0]!r} in store")
        if not utt_ids:
            return np.empty((0, self.dim), dtype=np.float64)
        return np.stack([self._entries[u] for u in utt_ids])

    def copy(self) -> "EmbeddingStore":
        dup = EmbeddingStore(self.dim)
        dup._entries = dict(self._entries)
        return dup

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        if self.dim != other.dim or len(self) != len(other):
            return False
        return all(
            other_vec is not None and np.array_equal(vec, other_vec)
            for vec, other_vec in (
                (v, other._entries.get(k)) for k, v in self._entries.items()
            )
        )


def save_store(store: EmbeddingStore, path: str | Path) -> None:
    """Serialize in canonical (ascending utt_id) order, atomically."""
    if store.dim < 1:
        raise StoreError(f"refusing to write store with dim={store.dim}")
    chunks = [_HEADER.pack(VCAE_MAGIC, VCAE_VERSION, store.dim, len(store))]
    for utt_id in store.ids():
        id_bytes = utt_id.encode("utf-8")
        chunks.append(_U32.pack(len(id_bytes)))
        chunks.append(id_bytes)
        vec32 = store._entries[utt_id].astype(np.float32)
        chunks.append(vec32.tobytes())
    atomic_write_bytes(path, b"".join(chunks))


def load_store(path: str | Path) -> EmbeddingStore:
    """Read a VCAE file, validating magic, version, and payload length."""
    payload = Path(path).read_bytes()
    if len(payload) < _HEADER.size:
        raise StoreError(f"{path}: truncated header ({len(payload)} bytes)")
    magic, version, dim, count = _HEADER.unpack_from(payload, 0)
    if magic != VCAE_MAGIC:
        raise StoreError(f"{path}: bad magic {magic!r}, expected {VCAE_MAGIC!r}")
    if version != VCAE_VERSION:
        raise StoreError(f"{path}: unsupported version {version}")
    if dim < 1:
        raise StoreError(f"{path}: invalid dim {dim}")
    store = EmbeddingStore(int(dim))
    offset = _HEADER.size
    vec_bytes = 4 * dim
    for i in range(count):
        if offset + 4 > len(payload):
            raise StoreError(f"{path}: truncated at record {i} (id length)")
        (id_len,) = _U32.unpack_from(payload, offset)
        offset += 4
        if id_len == 0:
            raise StoreError(f"{path}: record {i} has empty utt_id")
        if offset + id_len + vec_bytes > len(payload):
            raise StoreError(f"{path}: truncated at record {i}")
        try:
            utt_id = payload[offset : offset + id_len].decode("utf-8")
        except UnicodeDecodeError:
            raise StoreError(f"{path}: record {i} has invalid UTF-8 utt_id") from None
        offset += id_len
        vec = np.frombuffer(payload, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        offset += vec_bytes
        if not np.all(np.isfinite(vec)):
            raise StoreError(f"{path}: vector for {utt_id!r} contains non-finite values")
        if utt_id in store:
            raise StoreError(f"{path}: duplicate utt_id {utt_id!r}")
        store._entries[utt_id] = vec
    if offset != len(payload):
        raise StoreError(
            f"{path}: {len(payload) - offset} trailing bytes after declared count={count}"
        )
    return store
