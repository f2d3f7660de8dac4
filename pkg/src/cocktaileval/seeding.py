"""Deterministic RNG derivation.

Every random draw in the toolkit comes from a generator derived from the
master seed plus a path of labels naming the draw site (experiment, cell,
set, trial, ...). Streams are therefore independent of worker count and
of the order in which cells are processed.
"""

from __future__ import annotations

import hashlib

import numpy as np


def seed_path(master_seed: int, *parts) -> str:
    """Canonical string naming one derived stream, recorded in mix metadata."""
    return "/".join([str(int(master_seed)), *(str(p) for p in parts)])


def derive_rng(master_seed: int, *parts) -> np.random.Generator:
    """PCG64 generator keyed by sha256 of the seed path."""
    digest = hashlib.sha256(seed_path(master_seed, *parts).encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 32, 4)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))
