"""Deterministic, order-independent random streams.

Every random decision in the toolkit is drawn from a stream keyed by
(root_seed, component tag, sample_id). Streams are counter-based (Philox),
so results never depend on execution order, batching, or thread count.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def _tag_key(tag: str) -> int:
    return int.from_bytes(hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class SeedSpec:
    """Root seed plus the derivation rule for child streams.

    ``stream(tag, sample_id)`` always yields the same generator for the same
    (root_seed, tag, sample_id), no matter when or where it is called.
    """

    root_seed: int

    def __post_init__(self) -> None:
        if not 0 <= self.root_seed < 2**64:
            raise ValueError(f"root_seed must be a 64-bit unsigned integer, got {self.root_seed}")

    def stream(self, tag: str, sample_id: int = 0) -> np.random.Generator:
        if sample_id < 0:
            raise ValueError(f"sample_id must be non-negative, got {sample_id}")
        seq = np.random.SeedSequence(entropy=self.root_seed, spawn_key=(_tag_key(tag), sample_id))
        return np.random.Generator(np.random.Philox(seq))

    def child_seed(self, tag: str, sample_id: int = 0) -> int:
        """A derived 64-bit seed, for handing a whole stage its own root."""
        return int(self.stream(tag, sample_id).integers(0, 2**63))
