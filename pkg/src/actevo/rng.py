"""Seeded random streams.

Every random decision in the package goes through a ``numpy.random.Generator``
built here. Seeds for sub-streams (one per candidate slot, one per generation)
are derived by hashing, so they do not depend on evaluation order.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

Rng = np.random.Generator

_U64 = (1 << 64) - 1


def make_rng(seed: int) -> Rng:
    """Generator seeded by a 64-bit value; same seed, same sequence."""
    return np.random.Generator(np.random.PCG64(int(seed) & _U64))


def derive_seed(*parts: int | str) -> int:
    """Stable 64-bit hash of a tuple of ints and strings."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, str):
            b = p.encode()
            h.update(b"s" + struct.pack("<I", len(b)) + b)
        else:
            h.update(b"i" + struct.pack("<Q", int(p) & _U64))
    return int.from_bytes(h.digest(), "little")
