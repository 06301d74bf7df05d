"""Deterministic RNG derivation.

Every stochastic choice in the bench flows through `derive_rng` so that a run
is a pure function of its seeds. String keys are folded to integers via
SHA-256, never via `hash()`, which is salted per process.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    if isinstance(key, str):
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"rng key must be int or str, got {type(key).__name__}")


def derive_rng(*keys) -> np.random.Generator:
    """Return a Generator deterministically derived from an ordered key tuple."""
    if not keys:
        raise ValueError("at least one key is required")
    ints = [_key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(ints[0], spawn_key=tuple(ints[1:])))


def derive_seed(*keys) -> int:
    """Fold a key tuple into a single reproducible 63-bit integer seed."""
    ints = [_key_to_int(k) for k in keys]
    seq = np.random.SeedSequence(ints[0], spawn_key=tuple(ints[1:]))
    return int(seq.generate_state(1, np.uint64)[0] >> np.uint64(1))
