"""Per-request arm selection against the published allocation.

A uniform draw in [0, 1) is mapped to an arm through the cumulative
distribution of the allocation.  The cumulative table is an immutable
snapshot: request handlers read it freely while a new one atomically
replaces it after each batch.  There is deliberately no per-visitor
stickiness; every request draws fresh.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

from .allocator import Allocation
from .errors import ParameterError


@dataclass(frozen=True)
class CumulativeAllocation:
    """Prefix sums of the allocation in lexicographic arm order.

    Zero-weight arms occupy empty buckets: their cumulative value repeats
    the previous one, so no draw can land on them.
    """

    boundaries: tuple[tuple[str, float], ...]
    # derived lookup tables, kept alongside because pick_arm is hot
    _arms: tuple[str, ...] = field(init=False, repr=False, compare=False)
    _cums: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.boundaries:
            raise ParameterError("cumulative allocation must cover at least one arm")
        object.__setattr__(self, "_arms", tuple(a for a, _ in self.boundaries))
        object.__setattr__(self, "_cums", tuple(c for _, c in self.boundaries))


def build_cumulative(alloc: Allocation) -> CumulativeAllocation:
    """Prefix sums over arms sorted by id (the fixed, documented order)."""
    boundaries = []
    total = 0.0
    for arm in sorted(alloc.weights):
        total += alloc.weights[arm]
        boundaries.append((arm, total))
    return CumulativeAllocation(boundaries=tuple(boundaries))


def pick_arm(cum: CumulativeAllocation, u: float) -> str:
    """Map a uniform draw to an arm via half-open buckets [prev, next).

    The first boundary strictly greater than ``u`` wins, so a boundary
    value belongs to the bucket on its right and zero-width buckets are
    skipped.
    """
    if not 0.0 <= u < 1.0:
        raise ParameterError(f"u must be in [0, 1), got {u!r}")
    cums = cum._cums
    idx = bisect_right(cums, u)
    if idx >= len(cums):
        # float dust: the final cumulative landed a hair under u.
        # Fall back to the last non-empty bucket.
        idx = len(cums) - 1
        while idx > 0 and cums[idx] == cums[idx - 1]:
            idx -= 1
    return cum._arms[idx]
