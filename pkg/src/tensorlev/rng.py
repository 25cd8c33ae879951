"""Splittable, reproducible random streams.

A stream is a (seed, path) pair. Children extend the path, so every
component of a run gets its own generator without sharing state. Draws
come from numpy's counter-based Philox bit generator keyed through
SeedSequence spawn keys.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# stream ids for the top-level modules
SKETCH = 1
TNORM = 2
SAMPLER = 3
DRIVER = 4
DATA = 5


@dataclass(frozen=True)
class RngStream:
    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if any(int(p) < 0 for p in self.path):
            raise ValueError("stream ids must be non-negative")

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def as_stream(rng: RngStream | int) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))
