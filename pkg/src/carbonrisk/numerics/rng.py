"""Counter-based random substreams.

Every stochastic routine in the package draws from a stream derived from
(master_seed, stream_id). Streams with distinct ids are statistically
independent by construction of the Philox counter cipher, and the draws from
a given (seed, id) pair are identical on any worker layout, which is what
makes reports bit-reproducible under parallel scheduling.
"""

import numpy as np

_UINT64 = 1 << 64


def rng_stream(master_seed, stream_id):
    """A numpy Generator on an independent Philox substream.

    Args:
        master_seed: integer; reduced modulo 2**64.
        stream_id: integer; reduced modulo 2**64.

    Returns:
        numpy.random.Generator keyed by the (seed, id) pair.
    """
    key = (int(master_seed) % _UINT64) * _UINT64 + (int(stream_id) % _UINT64)
    return np.random.Generator(np.random.Philox(key=key))
