"""Seeded random streams.

All stochastic engines draw from :class:`numpy.random.Generator` backed by
PCG64 (128-bit state, period 2**128). Gaussian variates use numpy's
ziggurat sampler. Identical seed and call sequence give identical samples
within one numpy release.
"""

import numpy as np

RngStream = np.random.Generator

_SEED_MASK = (1 << 64) - 1


def rng_stream(seed: int) -> RngStream:
    """Return an independent generator for a 64-bit unsigned seed."""
    seed = int(seed)
    if seed < 0 or seed > _SEED_MASK:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def child_seeds(seed: int, n: int) -> list[int]:
    """Derive ``n`` reproducible per-run seeds from a master seed."""
    ss = np.random.SeedSequence(int(seed))
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in ss.spawn(n)]
