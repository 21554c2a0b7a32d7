"""Deterministic sub-stream derivation from one master seed.

Every random draw in the toolkit comes from a generator obtained through
:func:`substream`, keyed by the master seed plus a tuple of purpose tags.
Adding a new sampling step with its own tag never perturbs draws made under
other tags, and derived streams are stable across platforms and runs.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, *tags: object) -> int:
    """Hash (master_seed, tags...) into a 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", master_seed & MASK64))
    for tag in tags:
        h.update(repr(tag).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def substream(master_seed: int, *tags: object) -> np.random.Generator:
    """A fresh generator seeded by hash(master_seed, tags...)."""
    return np.random.default_rng(derive_seed(master_seed, *tags))


def sample_without_replacement(rng: np.random.Generator, n: int, k: int) -> list[int]:
    """Draw k distinct indices from range(n), in draw order.

    Partial Fisher-Yates over a sparse index map: O(k) time and memory, so
    sampling a handful of sources from a pool of tens of thousands stays
    cheap. Depends only on rng.integers, which is stable across numpy
    versions for a fixed bit generator state.
    """
    if k < 0 or k > n:
        raise ValueError(f"cannot sample {k} from {n} without replacement")
    remap: dict[int, int] = {}
    out: list[int] = []
    for i in range(k):
        j = int(rng.integers(i, n))
        out.append(remap.get(j, j))
        remap[j] = remap.get(i, i)
    return out
