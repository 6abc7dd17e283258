"""Deterministic seed derivation.

Every source of randomness in the package is an integer seed derived from a
master seed plus a structural path (e.g. generation index, individual index).
Derivation goes through numpy's SeedSequence, whose hashing is stable across
platforms and numpy versions, so results never depend on evaluation order,
thread scheduling or process boundaries.
"""

from __future__ import annotations

import numpy as np

# Leading path tags, so different consumers of the same master seed can never
# collide.
TAG_FITNESS = 0
TAG_INIT = 1
TAG_MUTATION_GATE = 2
TAG_MUTATION = 3
TAG_NEIGHBOR = 4
TAG_CANDIDATE_PICK = 5
TAG_ACCEPT = 6
TAG_SPLIT = 7
TAG_RUN = 8
TAG_DATA = 9


def derive_seed(master_seed: int, *path: int) -> int:
    """Derive a 64-bit integer seed from a master seed and an index path."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(p) for p in path))
    lo, hi = ss.generate_state(2)
    return (int(hi) << 32) | int(lo)


def rng_from(seed: int) -> np.random.Generator:
    """A fresh PCG64 generator for the given integer seed."""
    return np.random.default_rng(int(seed))
