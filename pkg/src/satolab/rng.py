"""Counter-based random streams.

A :class:`Stream` is an immutable key (seed plus a tuple of integers).  Child
streams are derived by appending key components, and each key maps to an
independent Philox generator, so results never depend on scheduling order.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


def _tag_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        if tag < 0:
            raise ValueError("stream key components must be nonnegative")
        return int(tag)
    return zlib.crc32(str(tag).encode()) + (1 << 40)


@dataclass(frozen=True)
class Stream:
    seed: int
    key: tuple = ()

    def child(self, *components) -> "Stream":
        return Stream(self.seed, self.key + tuple(_tag_int(c) for c in components))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))

    def label(self) -> str:
        return ":".join([str(self.seed), *map(str, self.key)])


def as_stream(rng) -> Stream:
    """Accept a Stream, an int seed, or None (seed 0)."""
    if isinstance(rng, Stream):
        return rng
    if rng is None:
        return Stream(0)
    if isinstance(rng, (int, np.integer)):
        return Stream(int(rng))
    raise TypeError(f"expected a Stream or integer seed, got {type(rng).__name__}")


def batches(n: int, batch_size: int):
    """Deterministic partition of range(n) into (index, start, stop)."""
    for b, start in enumerate(range(0, n, batch_size)):
        yield b, start, min(n, start + batch_size)
