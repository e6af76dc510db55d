"""Deterministic random streams.

Every random draw in the package comes from a ``numpy.random.Philox``
generator keyed by a root seed and an integer key path. Philox is a
counter-based generator, so a stream depends only on (seed, key) and any
trial of a sweep can be re-run in isolation.
"""

import numpy as np


def _sequence(seed: int, key: tuple[int, ...]) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(_sequence(seed, key)))


def derive_seed(seed: int, *key: int) -> int:
    """Child seed for (seed, key), stable across platforms and worker counts."""
    state = _sequence(seed, key).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))
