"""Seeded random stream used by every generator in the package.

The bit source is numpy's PCG64 (64-bit state, seeded through SeedSequence).
``rand`` draws uniform(0, 1) doubles.  ``randn`` turns consecutive uniform
pairs (u1, u2) into two normals by Box-Muller,

    z1 = sqrt(-2 log(1 - u1)) cos(2 pi u2),   z2 = ... sin(2 pi u2),

filled into the output in C order.  An odd request discards the unused
second value, so the stream position depends only on the request sizes.
"""
from __future__ import annotations

import math

import numpy as np


class Stream:
    def __init__(self, seed=0):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def rand(self, shape=None):
        if shape is None:
            return float(self._gen.random())
        return self._gen.random(shape)

    def randn(self, shape=None):
        count = 1 if shape is None else int(np.prod(shape))
        pairs = (count + 1) // 2
        u = self._gen.random((pairs, 2))
        rad = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        ang = 2.0 * math.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = rad * np.cos(ang)
        z[:, 1] = rad * np.sin(ang)
        z = z.ravel()[:count]
        if shape is None:
            return float(z[0])
        return z.reshape(shape)

    def spawn(self, key):
        """Independent child stream labelled by an integer key."""
        return Stream((self.seed * 1_000_003 + int(key)) & 0x7FFFFFFFFFFFFFFF)
