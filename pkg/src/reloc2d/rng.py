"""Named, independent random streams derived from one master seed.

Each consumer (world generation, sensor, odometry, each matching scheme)
owns its own stream, so enabling or reconfiguring one consumer never
perturbs the draws seen by another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(master_seed: int, name: str) -> np.random.Generator:
    """Generator for the named consumer, deterministic in (seed, name)."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(_name_key(name),))
    return np.random.Generator(np.random.PCG64(seq))
