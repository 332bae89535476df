"""Deterministic per-role random streams derived from a single run seed.

Every consumer of randomness (each model init, each epoch's shuffle, each
noise draw) gets its own generator keyed by (seed, role strings), so adding
or removing one consumer never shifts the draws seen by the others.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _role_key(tag: str) -> int:
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seeded_rng(seed: int, *roles) -> np.random.Generator:
    """Generator for (seed, *roles); same arguments, same stream."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    entropy.extend(_role_key(str(r)) for r in roles)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
