"""Small shared helpers: rank statistics and deterministic seed derivation."""

from __future__ import annotations

import hashlib
import math
from typing import Sequence


def nearest_rank(sorted_values: Sequence, percentile: float):
    """Nearest-rank percentile: the value at position ceil(p/100 * n), 1-indexed,
    of an ascending-sorted sample."""
    if len(sorted_values) == 0:
        raise ValueError("nearest_rank needs at least one value")
    if not 0.0 < percentile <= 100.0:
        raise ValueError(f"percentile must be in (0, 100], got {percentile}")
    rank = math.ceil(percentile / 100.0 * len(sorted_values))
    return sorted_values[max(rank, 1) - 1]


def substream_seed(global_seed: int, *names: str) -> int:
    """Derive a named RNG substream from one global seed.

    Hash-based so that changing the seed of one stage (e.g. the learner) never
    perturbs the draws of another (e.g. short-cascade downsampling).
    """
    h = hashlib.sha256()
    h.update(str(int(global_seed)).encode("ascii"))
    for name in names:
        h.update(b"\x00")
        h.update(str(name).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")
