"""
Deterministic random streams.

Every random draw in a simulation comes from a stream keyed by
(seed, purpose, round, device). Streams are independent numpy Generators
built from a SeedSequence, so adding a device or a purpose never shifts the
draws of another stream.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Tuple

import numpy as np

_MASK32 = 0xFFFFFFFF


def _purpose_code(purpose: str) -> int:
    # Stable across processes, unlike hash()
    return zlib.crc32(purpose.encode("utf-8")) & _MASK32


@dataclass(frozen=True)
class SeededRng:
    """A (seed, stream id) pair that reproduces the same draws every time."""

    seed: int
    stream_id: Tuple[int, ...] = ()

    def stream(self, purpose: str, round: int = 0, device: int = 0) -> "SeededRng":
        """Derive the stream for one purpose/round/device."""
        if round < 0 or device < 0:
            raise ValueError(f"round and device must be non-negative, got {round}, {device}")
        return SeededRng(self.seed, (_purpose_code(purpose), int(round), int(device)))

    def generator(self) -> np.random.Generator:
        """Fresh Generator positioned at the start of this stream."""
        seed = int(self.seed) & 0xFFFFFFFFFFFFFFFF
        entropy = [seed & _MASK32, seed >> 32, *self.stream_id]
        return np.random.default_rng(np.random.SeedSequence(entropy))

    def generator_for(self, purpose: str, round: int = 0, device: int = 0) -> np.random.Generator:
        return self.stream(purpose, round, device).generator()
