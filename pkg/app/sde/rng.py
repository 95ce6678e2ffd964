from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from app.config import settings

# auxiliary streams live above 2**63 so they never collide with path streams
AUXILIARY_BASE = 1 << 63
RESAMPLING_STREAM = AUXILIARY_BASE
INITIAL_DRAW_STREAM = AUXILIARY_BASE + 1
BOOTSTRAP_STREAM = AUXILIARY_BASE + 2
ORACLE_STREAM = AUXILIARY_BASE + 3


def stream_generator(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream).

    Philox is keyed by the 128-bit integer seed * 2**64 + stream, so the draws
    of one stream never depend on which other streams exist or run.
    """
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream ids must be nonnegative")
    if seed >= 1 << 64 or stream >= 1 << 64:
        raise ValueError("seed and stream ids must fit in 64 bits")
    return np.random.Generator(np.random.Philox(key=(seed << 64) | stream))


def auxiliary_generator(seed: int, stream: int) -> np.random.Generator:
    if stream < AUXILIARY_BASE:
        raise ValueError("auxiliary streams must use one of the reserved ids")
    return stream_generator(seed, stream)


class NoiseStreams:
    """Brownian increments for a fixed set of streams, refilled in chunks.

    Every stream draws `chunk_steps` rows of `channels` standard normals at a
    time, so step k of a stream always uses the same numbers whatever the
    block it is scheduled in.
    """

    def __init__(
        self,
        seed: int,
        streams: Sequence[int] | np.ndarray,
        channels: int,
        chunk_steps: int | None = None,
    ) -> None:
        self.streams = np.asarray(streams, dtype=np.int64)
        self.channels = channels
        self.chunk_steps = chunk_steps or settings.rng_chunk_steps
        self._generators = [stream_generator(seed, int(s)) for s in self.streams]
        self._buffer = np.empty((len(self._generators), self.chunk_steps, channels))
        self._cursor = self.chunk_steps

    def _refill(self) -> None:
        for row, generator in enumerate(self._generators):
            self._buffer[row] = generator.standard_normal((self.chunk_steps, self.channels))
        self._cursor = 0

    def next(self, dt: float) -> np.ndarray:
        """(streams, channels) increments with variance dt."""
        if self._cursor == self.chunk_steps:
            self._refill()
        out = self._buffer[:, self._cursor, :] * math.sqrt(dt)
        self._cursor += 1
        return out
