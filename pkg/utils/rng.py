# filename: utils/rng.py
"""
Seed splitting rule shared by every parallel computation.

Stream w of master seed s is `np.random.SeedSequence(s).spawn(k)[w]`; the
children of a SeedSequence depend only on (s, w), so stream w is the same
whether k workers or more are requested.
"""
from typing import List

import numpy as np


def spawn_seeds(master_seed: int, count: int) -> List[np.random.SeedSequence]:
    if count < 1:
        raise ValueError(f"Need at least one stream, got {count}")
    return np.random.SeedSequence(int(master_seed)).spawn(count)


def spawn_generators(master_seed: int, count: int) -> List[np.random.Generator]:
    return [np.random.default_rng(seq) for seq in spawn_seeds(master_seed, count)]


def derive_seed(master_seed: int, *keys: int) -> int:
    """A 63-bit integer seed for the stream addressed by `keys` under `master_seed`."""
    seq = np.random.SeedSequence([int(master_seed), *[int(k) for k in keys]])
    high, low = (int(x) for x in seq.generate_state(2, dtype=np.uint32))
    return ((high << 32) | low) >> 1
