"""Price-range discretization utilities.

Continuous price ranges are approximated by uniform grids that feed the
one-hot selection in the MILP builders. A binary-expansion encoder is
provided as a compact alternative representation of a grid level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np


@dataclass(frozen=True)
class PriceGridSpec:
    """Uniform grid of 2**H price levels on [p_min, p_max)."""

    p_min: float
    p_max: float
    bits: int                      # H
    delta: float = field(init=False)
    levels: np.ndarray = field(init=False)

    def __post_init__(self):
        delta = (self.p_max - self.p_min) / 2 ** self.bits
        levels = self.p_min + delta * np.arange(2 ** self.bits)
        levels.flags.writeable = False
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "levels", levels)


def discretize_range(p_min: float, p_max: float, bits: int) -> PriceGridSpec:
    """Split [p_min, p_max) into 2**bits equal intervals and return their
    left endpoints as the candidate price levels."""
    if not (np.isfinite(p_min) and np.isfinite(p_max) and p_max > p_min):
        raise ValueError(f"invalid price range [{p_min}, {p_max}]")
    if bits < 1:
        raise ValueError(f"bit count must be >= 1, got {bits}")
    return PriceGridSpec(float(p_min), float(p_max), int(bits))


def binary_expansion_bits(level: int, bits: int) -> List[int]:
    """Encode a grid level as bits+1 binary digits, least significant
    first; round-trips with level_from_bits."""
    if not 0 <= level < 2 ** bits:
        raise ValueError(f"level {level} out of range for {bits} bits")
    return [(level >> h) & 1 for h in range(bits + 1)]


def level_from_bits(b: Sequence[int]) -> int:
    """Inverse of binary_expansion_bits."""
    if any(bit not in (0, 1) for bit in b):
        raise ValueError(f"non-binary digit in {list(b)}")
    return sum(bit << h for h, bit in enumerate(b))
