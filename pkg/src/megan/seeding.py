"""Deterministic RNG derivation.

All randomness in the package flows from a single integer seed. Each
subsystem derives its own counter-based stream so that adding draws in
one place never shifts the sequence seen by another.
"""

import numpy as np

# Fixed stream tags; never reorder or reuse values.
STREAM_INIT = 1
STREAM_PRETRAIN = 2
STREAM_TRAIN = 3
STREAM_SYNTH = 4
STREAM_EVAL = 5
STREAM_SPLIT = 6


def derive_rng(seed, *stream):
    """Return a Generator for (seed, *stream), stable across runs and platforms."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(seq))
