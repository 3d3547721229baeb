"""Named, reproducible random streams derived from one master seed."""

import zlib

import numpy as np

STREAMS = ("target", "noise", "constraints", "sensors", "graph", "dither")


def stream(seed, name, *keys):
    """Return a generator for stream ``name`` refined by integer ``keys``.

    Streams with different names or keys are statistically independent, and
    the draws of one never depend on how much another has been consumed.
    """
    if name not in STREAMS:
        raise ValueError(f"unknown random stream {name!r}")
    entropy = [int(seed), zlib.crc32(name.encode())] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
