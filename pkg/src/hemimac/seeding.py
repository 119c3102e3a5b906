"""Deterministic seed derivation.

Every random stream in the package is obtained from a 64-bit seed that is
derived from a base seed and a tuple of integer labels::

    h = splitmix64(base)
    for label in labels:
        h = splitmix64(h ^ splitmix64(label + GOLDEN))

The mixing is stateless, so a trial's streams depend only on
``(base_seed, trial_index, stream_tag)`` and never on execution order or on
how many workers run the trials.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# stream tags
CODEBOOK = 1
ACTIVE_SET = 2
NOISE = 3
WENDEL = 4
DELTA = 5
PAIRWISE = 6
COLLISION = 7


def splitmix64(x):
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base, *labels):
    h = splitmix64(int(base) & MASK64)
    for label in labels:
        h = splitmix64(h ^ splitmix64((int(label) + GOLDEN) & MASK64))
    return h


def make_rng(seed, *labels):
    """A PCG64 generator seeded from ``derive_seed(seed, *labels)``."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *labels)))
