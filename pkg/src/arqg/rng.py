"""Seeded, counter-based random streams.

Every stochastic routine draws from Philox-4x64 keyed by ``(seed, stream)``,
so a replication can be regenerated on its own and results match across
platforms for a given numpy release.
"""

from __future__ import annotations

import os

import numpy as np

SEED_ENV = "ARQG_SEED"


def make_generator(seed: int, stream: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))


def default_seed(fallback: int = 0) -> int:
    value = os.environ.get(SEED_ENV)
    return int(value) if value not in (None, "") else fallback
