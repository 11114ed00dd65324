"""Stable hashing and seeded RNG derivation.

Every stochastic choice in the toolkit flows through these helpers so runs
are reproducible across platforms, processes, and thread schedules.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def stable_hash64(key: str, seed: int) -> int:
    """Hash a UTF-8 key together with a seed's 8 little-endian bytes.

    Pure function of (key, seed); identical on every platform, unlike
    Python's built-in ``hash``.
    """
    return fnv1a64(key.encode("utf-8") + (seed & _MASK64).to_bytes(8, "little"))


def derive_rng(seed: int, key: str) -> np.random.Generator:
    """Independent generator for the (seed, key) cell.

    Cells hashed from distinct keys get decorrelated streams, so parallel
    evaluation order cannot change any result.
    """
    return np.random.default_rng([seed & _MASK64, stable_hash64(key, seed)])
