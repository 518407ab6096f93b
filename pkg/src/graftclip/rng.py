"""Deterministic seed derivation.

Every random stream in the package is a ``numpy.random.Generator`` seeded
from a 64-bit value derived by hashing a tuple of labels. Python's builtin
``hash`` is process-salted, so all derivation goes through blake2b.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: object) -> int:
    """Map a tuple of labels (ints, strings) to a stable 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        token = f"{type(part).__name__}:{part}"
        h.update(token.encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def make_rng(*parts: object) -> np.random.Generator:
    """Generator seeded from :func:`derive_seed` of the given labels."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))


def content_hash64(payload: bytes) -> str:
    """64-bit content hash of raw bytes, as a fixed-width hex string."""
    return hashlib.blake2b(payload, digest_size=8).hexdigest()
