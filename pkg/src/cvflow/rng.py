"""Seeded random streams.

Every stochastic component in the package draws from a Philox counter-based
generator keyed by (seed, stream tag, substream index).  Philox is specified
by algorithm, not by platform default, so corpora and training runs are
bit-reproducible across machines.
"""

import numpy as np

# Stream tags keep independent consumers of the same experiment seed from
# colliding.  New consumers must claim a fresh tag.
STREAM_DATA = 1
STREAM_PARAM_INIT = 2
STREAM_TRAIN = 3
STREAM_SAMPLER = 4
STREAM_AE = 5
STREAM_BASELINE = 6
STREAM_EVAL = 7


_MASK64 = (1 << 64) - 1


def make_rng(seed, stream=0, substream=0):
    """Philox generator keyed by (seed, stream, substream), all 64-bit."""
    key = np.array(
        [int(seed) & _MASK64, int(stream) & _MASK64, int(substream) & _MASK64, 0],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
