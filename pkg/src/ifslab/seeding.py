"""Deterministic random-number plumbing.

Every randomized routine in the package draws from numpy's PCG64 generator
seeded through a ``SeedSequence``, so a single integer seed reproduces every
sample.  Reports record :data:`RNG_ALGORITHM` so the provenance of the
randomness is visible in the output files.
"""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "numpy-pcg64"


def rng_from(seed: int) -> np.random.Generator:
    """Generator for a single stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """n independent child generators derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]
