"""Counter-based random streams.

Every stochastic quantity in morseflow is drawn from a stream addressed by
``(seed, i, j, k)``. Streams are Philox generators keyed by the master seed
with the path written into the high words of the 256-bit counter, so the
draws for one sample never depend on how many other samples exist or which
worker produced them. The path length goes into the upper key word, which
keeps ``(i, j)`` and ``(i, j, 0)`` apart.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the stream ``path`` (at most three indices)."""
    if len(path) > 3:
        raise ValueError("stream paths have at most three components")
    counter = [0, 0, 0, 0]
    # the low word is left free for the generator's own increments
    for slot, index in zip((3, 2, 1), path):
        if index < 0:
            raise ValueError("stream indices must be non-negative")
        counter[slot] = int(index) & _MASK64
    key = check_seed(seed) | (len(path) << 64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
