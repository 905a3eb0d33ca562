"""Deterministic random-stream derivation.

Every stochastic operation in the package draws from its own PCG64
generator keyed by ``(STREAM_VERSION, crc32(tag), seed, *extra)``.  Two
operations given the same user seed therefore see independent streams,
and a run is bit-reproducible as long as STREAM_VERSION is unchanged.
Bumping STREAM_VERSION deliberately invalidates all recorded streams.
"""

from __future__ import annotations

import zlib

import numpy as np

STREAM_VERSION = 1
GENERATOR = "PCG64"


def substream(seed: int, tag: str, *extra: int) -> np.random.Generator:
    """Generator for operation `tag` under master `seed`.

    `extra` integers split further (e.g. one stream per epoch).
    """
    key = (STREAM_VERSION, zlib.crc32(tag.encode("utf-8")), int(seed)) + tuple(
        int(x) for x in extra
    )
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))
