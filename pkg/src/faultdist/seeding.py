"""Deterministic RNG stream derivation.

Every random choice in the library hangs off a single master seed.  Domains
are identified by readable labels ("hierarchy", ("forest", 3), ...); each
label is hashed into a spawn key, so the stream a component receives is
independent of build order and of how many other components drew randomness
before it.
"""

from __future__ import annotations

import hashlib

import numpy as np


def spawn_key(*labels: str | int) -> tuple[int, ...]:
    """Map readable labels to a SeedSequence spawn key."""
    parts: list[int] = []
    for lab in labels:
        digest = hashlib.blake2b(repr(lab).encode(), digest_size=8).digest()
        parts.append(int.from_bytes(digest[:4], "little"))
        parts.append(int.from_bytes(digest[4:], "little"))
    return tuple(parts)


def stream(master_seed: int, *labels: str | int) -> np.random.Generator:
    """PCG64 generator for the domain named by ``labels``."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=spawn_key(*labels))
    return np.random.Generator(np.random.PCG64(ss))
