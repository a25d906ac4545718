"""Stable seed derivation.

Seeds are derived with SHA-256 over a fixed little-endian encoding so the same
(seed, index, ...) tuple yields the same stream on every platform and Python
version; ``hash()`` is salted per process and cannot be used here.
"""
import hashlib
from typing import Iterable

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *path: int) -> int:
    digest = hashlib.sha256()
    for part in (seed, *path):
        digest.update((int(part) & _MASK64).to_bytes(8, "little"))
    return int.from_bytes(digest.digest()[:8], "little")


def experiment_seed(seed: int, experiment_index: int) -> int:
    return derive_seed(seed, experiment_index)


def agent_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """One independent generator per agent, so agents never share mutable state."""
    return [np.random.default_rng(derive_seed(seed, 1, k)) for k in range(count)]


def init_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, 0))


def fingerprint(parts: Iterable[bytes]) -> str:
    digest = hashlib.sha256()
    for part in parts:
        digest.update(part)
    return digest.hexdigest()[:16]
