"""Seeded counter-based random streams.

Every consumer derives its own independent stream from one user seed and a
purpose label, so fold assignment, Gibbs sampling and simulation never share
random numbers and parallel execution stays reproducible.
"""

from __future__ import annotations

import numpy as np

FOLDS = 1
GIBBS = 2
SIMULATION = 3


def stream(seed: int, purpose: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), *map(int, keys)))
    return np.random.Generator(np.random.Philox(ss))
