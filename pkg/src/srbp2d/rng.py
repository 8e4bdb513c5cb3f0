"""Counter-based random streams.

Every stochastic component draws from a Philox substream that is a pure
function of (master_seed, index...), so results are independent of
iteration order and worker count.
"""

import numpy as np


def substream(seed, *indices):
    """Return a Generator for the substream keyed by (seed, indices).

    At most three indices; they are placed in the high words of the
    Philox counter, leaving 2^64 draws per stream.
    """
    if len(indices) > 3:
        raise ValueError("at most three substream indices")
    counter = [0, 0, 0, 0]
    for k, idx in enumerate(indices):
        counter[3 - k] = np.uint64(idx)
    bitgen = np.random.Philox(key=np.uint64(seed), counter=counter)
    return np.random.Generator(bitgen)
