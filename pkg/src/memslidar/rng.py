"""Seeded random streams with a pinned algorithm.

Every seeded operation draws from a Philox-4x64 counter-based generator
whose 128-bit key is ``seed + (substream << 64)`` with the counter starting
at zero. Integer draws, shuffles and uniforms are derived from the raw
64-bit outputs with the fixed rules below, so they are bit-identical on any
platform and numpy version that ships ``numpy.random.Philox``:

* uniform double: ``(raw >> 11) * 2**-53``
* integer below ``m``: rejection of ``raw >= floor(2**64 / m) * m``, then ``raw % m``
* permutation: Fisher-Yates from the last index down
* normal: Box-Muller cosine branch from two uniforms (uses the platform libm)
"""
from __future__ import annotations

import numpy as np

_TWO64 = 1 << 64


class Stream:
    def __init__(self, seed: int, substream: int = 0):
        seed, substream = int(seed), int(substream)
        if not (0 <= seed < _TWO64) or not (0 <= substream < _TWO64):
            raise ValueError("seed and substream must be in [0, 2**64)")
        self.seed = seed
        self.substream = substream
        self._bits = np.random.Philox(key=seed + (substream << 64))

    def raw(self, n: int) -> np.ndarray:
        return self._bits.random_raw(n).astype(np.uint64)

    def uniform(self, n: int | None = None, low: float = 0.0, high: float = 1.0):
        k = 1 if n is None else n
        u = (self.raw(k) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        out = low + (high - low) * u
        return float(out[0]) if n is None else out

    def below(self, m: int) -> int:
        if m <= 0:
            raise ValueError("bound must be positive")
        limit = (_TWO64 // m) * m
        while True:
            r = int(self._bits.random_raw())
            if r < limit:
                return r % m

    def permutation(self, n: int) -> np.ndarray:
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def normal(self, n: int) -> np.ndarray:
        u = self.uniform(2 * n).reshape(n, 2)
        return np.sqrt(-2.0 * np.log(1.0 - u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])
