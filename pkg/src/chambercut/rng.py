"""Named, independent random streams derived from one 64-bit seed.

Each stream is ``SeedSequence(seed, spawn_key=(crc32(name),))`` so adding a
new consumer never shifts the draws of existing ones.
"""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("slice", "gamma", "loops", "center", "sampling", "direction", "flow")


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


class SeedStreams:
    def __init__(self, seed: int | None = None):
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (1 << 64))
        if not 0 <= int(seed) < 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)

    def sequence(self, name: str) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=(stream_key(name),))

    def generator(self, name: str) -> np.random.Generator:
        return np.random.default_rng(self.sequence(name))

    def __getitem__(self, name: str) -> np.random.Generator:
        return self.generator(name)
