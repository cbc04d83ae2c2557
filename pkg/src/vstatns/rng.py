"""Counter-based seed derivation.

Every random stream is addressed by ``(root_seed, *indices)`` and hashed through
:class:`numpy.random.SeedSequence`, so a replication draws the same numbers no
matter which worker runs it or in what order.
"""
import numpy as np

# stream tags
INNOVATIONS = 0
WARMUP = 1
COUPLING = 2
GAUSS_ANALOG = 3
MIXTURE = 4
MC_REPLICATION = 5
DEGENERACY = 6
ORACLE = 7


def derive_seed(root_seed, *indices):
    """Return a SeedSequence keyed by the root seed and a tuple of stream indices.

    ``root_seed`` may itself be a SeedSequence; its spawn key is extended.
    """
    extra = tuple(int(i) for i in indices)
    if isinstance(root_seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=root_seed.entropy, spawn_key=tuple(root_seed.spawn_key) + extra)
    root = int(root_seed)
    if root < 0:
        raise ValueError("seed must be non-negative")
    return np.random.SeedSequence(entropy=root, spawn_key=extra)


def make_rng(root_seed, *indices):
    return np.random.Generator(np.random.PCG64(derive_seed(root_seed, *indices)))
