"""Train/val/test split assignment.

Temporal tables split at the anchor level: the newest anchor is the test
set, the second newest validation, everything older trains. Static tables
split per entity by a seeded hash so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import ExecutionError

TRAIN, VAL, TEST = "train", "val", "test"


@dataclass(frozen=True)
class SplitPolicy:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        total = self.train + self.val + self.test
        if abs(total - 1.0) > 1e-9:
            raise ExecutionError(f"split ratios must sum to 1, got {total}")
        if min(self.train, self.val, self.test) < 0:
            raise ExecutionError("split ratios must be non-negative")


def split_for_anchor_rank(rank: int) -> str:
    """`rank` counts anchors newest-first: 0 = test, 1 = val, rest = train."""
    if rank == 0:
        return TEST
    if rank == 1:
        return VAL
    return TRAIN


def split_for_key(key, policy: SplitPolicy) -> str:
    digest = hashlib.sha256(f"{policy.seed}|{key!r}".encode()).digest()
    u = int.from_bytes(digest[:8], "big") / 2**64
    if u < policy.train:
        return TRAIN
    if u < policy.train + policy.val:
        return VAL
    return TEST
