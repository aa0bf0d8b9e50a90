"""Named random streams derived from the single experiment seed."""
from __future__ import annotations

import zlib

import numpy as np

#: Every consumer of randomness in the pipeline draws from one of these.
STREAM_NAMES = ("env", "actor_noise", "batch", "init", "eval")


def stream(seed, name, *extra):
    """Generator for sub-stream ``name`` (plus optional integer qualifiers).

    The stream depends only on ``seed`` and its key, never on the order in
    which streams are requested.
    """
    if name not in STREAM_NAMES:
        raise KeyError(f"unknown stream {name!r}; choose from {STREAM_NAMES}")
    key = (zlib.crc32(name.encode()),) + tuple(int(x) for x in extra)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
