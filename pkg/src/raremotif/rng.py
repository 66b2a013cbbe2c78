"""Seedable, splittable random streams.

Every replicate ``k`` of a run seeded with ``seed`` draws from its own
stream keyed by ``(seed, k)``, so estimates do not depend on the order or
the process in which replicates are simulated.
"""
from __future__ import annotations

from bisect import bisect_right
from typing import Sequence

import numpy as np

_BUFFER = 512

# spawn-key namespaces
REPLICATE = 0
AUXILIARY = 1


class Stream:
    """Buffered scalar uniforms on top of a numpy ``Generator``.

    Scalar draws from numpy generators are slow; inner simulation loops
    instead pull floats out of a pre-drawn block.
    """

    __slots__ = ("generator", "_buf", "_pos")

    def __init__(self, generator: np.random.Generator):
        self.generator = generator
        self._buf: list[float] = []
        self._pos = 0

    @classmethod
    def from_key(cls, seed: int, *key: int) -> "Stream":
        ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
        return cls(np.random.Generator(np.random.PCG64(ss)))

    def random(self) -> float:
        pos = self._pos
        if pos == len(self._buf):
            self._buf = self.generator.random(_BUFFER).tolist()
            pos = 0
        self._pos = pos + 1
        return self._buf[pos]

    def randint(self, low: int, high: int) -> int:
        """Uniform integer on the closed range ``[low, high]``."""
        return low + int(self.random() * (high - low + 1))

    def categorical(self, cdf: Sequence[float]) -> int:
        """Index drawn from a cumulative distribution whose last entry is 1."""
        return bisect_right(cdf, self.random())


def replicate_stream(seed: int, k: int) -> Stream:
    return Stream.from_key(seed, REPLICATE, k)


def auxiliary_stream(seed: int, k: int = 0) -> Stream:
    """Stream for pre-passes (e.g. acceptance-rate estimation), disjoint from replicates."""
    return Stream.from_key(seed, AUXILIARY, k)


def cdf_rows(prob: np.ndarray) -> list[list[float]]:
    """Row-wise cumulative sums as python lists with the last entry pinned to 1."""
    prob = np.atleast_2d(np.asarray(prob, dtype=float))
    rows = []
    for row in prob:
        c = np.cumsum(row / row.sum())
        c[-1] = 1.0
        rows.append(c.tolist())
    return rows
