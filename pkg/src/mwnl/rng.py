"""Seeded random streams.

Every consumer of randomness asks for a named sub-stream derived from one
master seed, so changing how many draws one component makes never shifts
the draws of another.
"""

import zlib

import numpy as np

STREAMS = ("policy", "init", "shuffle", "dropout", "split", "synth", "sampler")


def _name_key(name):
    return zlib.crc32(name.encode("utf-8"))


def substream(seed, name, *index):
    """Return a Generator for ``(seed, name, *index)``.

    The same arguments always give the same stream; the integer ``index``
    parts (image index, epoch, ...) let parallel workers reproduce a
    serial run exactly.
    """
    key = [int(seed), _name_key(name)] + [int(i) for i in index]
    return np.random.default_rng(np.random.SeedSequence(key))


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
