"""Random streams.

Every stochastic routine takes an explicit seed and builds its own
``numpy.random.Generator`` on the Philox-4x64 counter-based bit generator, so
results do not depend on call order elsewhere in the program.
"""
import numpy as np


def make_rng(seed, *stream):
    """Generator for ``seed``; extra integers select an independent sub-stream."""
    if isinstance(seed, np.random.Generator):
        return seed
    key = [int(seed)] + [int(s) for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
