"""Deterministic substream derivation.

Every randomized routine takes an integer seed and derives independent
generators through `substream(seed, *path)`.  The path elements (small ints
and short labels) are folded into a SeedSequence spawn key, so a computation
is a pure function of (parameters, seed) regardless of how its pieces are
scheduled.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("substream path ints must be non-negative")
        return int(part)
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big")
    raise TypeError(f"unsupported substream path element: {part!r}")


def substream(seed: int, *path) -> np.random.Generator:
    """Generator for the substream identified by (seed, *path)."""
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=tuple(_key_part(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
