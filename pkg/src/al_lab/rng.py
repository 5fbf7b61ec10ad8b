"""Deterministic, purpose-tagged random streams.

Every random draw in the lab comes from a stream identified by
``(master_seed, replicate, tag)``.  Streams are derived through numpy's
``SeedSequence`` so distinct triples are statistically independent and
adding a new tag never perturbs the draws of an existing one.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1


def tag_key(tag: str) -> int:
    """Stable 32-bit key for a purpose tag (independent of PYTHONHASHSEED)."""
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:4], "little")


def make_stream(master_seed: int, replicate: int, tag: str) -> np.random.Generator:
    if replicate < 0:
        raise ValueError("replicate id must be nonnegative")
    seq = np.random.SeedSequence(int(master_seed) & MASK64, spawn_key=(int(replicate), tag_key(tag)))
    return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class RngContract:
    master_seed: int

    def stream(self, replicate: int, tag: str) -> np.random.Generator:
        return make_stream(self.master_seed, replicate, tag)

    def streams(self, replicate: int, tags=("z", "pick", "base", "synth", "tie", "eval")):
        return {t: self.stream(replicate, t) for t in tags}
