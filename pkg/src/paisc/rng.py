"""Reproducible random number streams.

A stream is identified by a (seed, stream_id) pair; the pair fully determines
the generated sequence, and distinct stream ids yield statistically independent
streams (numpy SeedSequence guarantees). Derived streams fold extra integer
keys into the stream id with a splitmix-style hash, so estimators can hand out
per-task streams whose output does not depend on scheduling order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _mix64(h: int, k: int) -> int:
    # splitmix64 finalizer, used as a keyed fold
    h = (h + 0x9E3779B97F4A7C15 + (k & _MASK64)) & _MASK64
    h = ((h ^ (h >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    h = ((h ^ (h >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (h ^ (h >> 31)) & _MASK64


@dataclass(frozen=True)
class RngStream:
    """Deterministic, forkable random stream."""

    seed: int
    stream_id: int = 0

    def derive(self, *keys: int) -> "RngStream":
        """Child stream keyed by integers; independent of sibling streams."""
        sid = self.stream_id & _MASK64
        for k in keys:
            sid = _mix64(sid, k)
        return RngStream(self.seed, sid)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.seed & _MASK64, spawn_key=(self.stream_id & _MASK64,)
        )
        return np.random.default_rng(ss)


def as_generator(rng: "RngStream | np.random.Generator") -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng
