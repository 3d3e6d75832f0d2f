"""Reproducible RNG substreams for Monte-Carlo runs.

Every random draw in the simulator comes from a substream keyed by
(master_seed, *ids) where ids identify the consumer, e.g.
(user_id, trial_index, purpose).  Streams are independent of worker
scheduling, so results are bit-identical for any thread count.
"""

from __future__ import annotations

import numpy as np

# Purpose codes for substream derivation.  Keep stable: reordering them
# changes every published result.
CHANNEL = 0
BITS = 1
NOISE = 2
SYMBOLS = 3


def substream(master_seed: int, *ids: int) -> np.random.Generator:
    """Return an independent Generator for the given id tuple.

    Uses numpy's SeedSequence spawn-key mechanism, so distinct id tuples
    give statistically independent, reproducible streams.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(i) for i in ids))
    return np.random.Generator(np.random.PCG64(ss))
