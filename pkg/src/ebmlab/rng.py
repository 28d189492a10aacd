"""Deterministic random-stream derivation.

All randomness in the package flows from a single master seed. Component
streams are derived by stable hashing of (seed, component name, index) so
that results do not depend on the order in which components consume
randomness, or on how work is split across workers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, name: str, index: int = 0) -> int:
    """Hash (master_seed, name, index) into a 64-bit child seed."""
    key = f"{master_seed}:{name}:{index}".encode()
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "little")


def stream(master_seed: int, name: str, index: int = 0) -> np.random.Generator:
    """A generator seeded from the derived (seed, name, index) stream."""
    return np.random.default_rng(derive_seed(master_seed, name, index))
