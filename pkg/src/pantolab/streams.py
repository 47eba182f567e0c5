"""Reproducible per-path random streams.

A stream is identified by ``(master_seed, path_index)``.  Its Philox key is

    k0 = mix64(master_seed)
    k1 = mix64(k0 ^ mix64(path_index) ^ (lane * GOLDEN))

where ``mix64`` is the splitmix64 finaliser (add the golden-ratio constant,
then multiply-xorshift with 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB).
Lane 0 feeds the jump skeleton, lane 1 the between-jump bridge draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

SKELETON_LANE = 0
BRIDGE_LANE = 1


def mix64(z: int) -> int:
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    path_index: int

    def key(self, lane: int = SKELETON_LANE) -> tuple[int, int]:
        k0 = mix64(self.master_seed & MASK64)
        k1 = mix64(k0 ^ mix64(self.path_index & MASK64) ^ ((lane * GOLDEN) & MASK64))
        return k0, k1

    def generator(self, lane: int = SKELETON_LANE) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=np.array(self.key(lane), dtype=np.uint64)))
