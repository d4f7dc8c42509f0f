"""Seeded random generator helpers.

Every stochastic routine takes ``rng`` as either an integer seed or a
``numpy.random.Generator``. Integer seeds are recorded so results can be
reproduced; independent streams for chains/workers follow the rule
``seed + index``.
"""

import numpy as np


def as_generator(rng):
    """Return ``(generator, seed_record)`` for an int seed or a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng, {"generator": type(rng.bit_generator).__name__, "seed": None}
    if rng is None:
        raise ValueError("a seed or numpy Generator is required (no implicit entropy)")
    seed = int(rng)
    return np.random.default_rng(seed), {"generator": "PCG64", "seed": seed}


def stream_generators(rng, count):
    """Independent generators for ``count`` parallel streams.

    Integer seed ``s`` gives streams seeded ``s, s+1, ...``; a Generator is
    split with ``Generator.spawn``.
    """
    if isinstance(rng, np.random.Generator):
        return rng.spawn(count)
    seed = int(rng)
    return [np.random.default_rng(seed + k) for k in range(count)]


def seed_record(rng):
    """The seed record for ``rng`` without consuming any of its state."""
    if isinstance(rng, np.random.Generator):
        return {"generator": type(rng.bit_generator).__name__, "seed": None}
    return {"generator": "PCG64", "seed": int(rng)}
