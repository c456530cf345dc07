"""Counter-based random number streams.

Every stochastic routine in the package draws from a Philox generator keyed
by ``(seed, *stream)``.  Streams are cheap to construct and independent, so
work items (lines, realizations, batches) can be distributed over any number
of workers in any order and still reproduce bit-identical results.
"""

from __future__ import annotations

import numpy as np

# Fixed stream name-space ids, one per independent consumer.
STREAM_ENSEMBLE = 1
STREAM_LINE = 2
STREAM_CIRCULANT = 3
STREAM_MC = 4
STREAM_BOOTSTRAP = 5
STREAM_SHAPE = 6


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for the (seed, stream...) counter address.

    The same address always yields the same stream, on every platform and
    under any parallel layout.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def fold_seed(seed: int, *stream: int) -> int:
    """A derived 64-bit seed for the (seed, stream...) address, for APIs
    that take a plain integer seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return int(ss.generate_state(2, np.uint64)[0])
