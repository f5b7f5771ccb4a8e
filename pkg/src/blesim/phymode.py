"""PHY mode enumeration and per-mode constants."""
from __future__ import annotations

from enum import Enum

import numpy as np


class PhyMode(Enum):
    LE1M = "LE1M"
    LE2M = "LE2M"
    LE500K = "LE500K"
    LE125K = "LE125K"

    @property
    def symbol_rate(self) -> float:
        """On-air symbol rate in symbols/s (coded modes stay at 1 Msym/s)."""
        return 2e6 if self is PhyMode.LE2M else 1e6

    @property
    def coded(self) -> bool:
        return self in (PhyMode.LE500K, PhyMode.LE125K)

    @property
    def preamble_len(self) -> int:
        if self is PhyMode.LE1M:
            return 8
        if self is PhyMode.LE2M:
            return 16
        return 80

    @property
    def spreading(self) -> int:
        """Symbols emitted per FEC-coded bit in block 2 (P of the pattern mapper)."""
        if self is PhyMode.LE125K:
            return 4
        if self is PhyMode.LE500K:
            return 1
        raise_uncoded(self)

    @property
    def ci_bits(self) -> int:
        """Coding-indicator field value (2 bits) announcing the block-2 scheme."""
        if self is PhyMode.LE125K:
            return 0b00
        if self is PhyMode.LE500K:
            return 0b01
        raise_uncoded(self)

    def preamble_bits(self, access_address: int = 0) -> np.ndarray:
        """Preamble bit pattern in transmission order.

        Uncoded modes alternate 0/1 starting from the LSB of the access
        address; coded modes repeat the fixed 8-symbol pattern 00111100
        ten times regardless of the address.
        """
        if self.coded:
            return np.tile(np.array([0, 0, 1, 1, 1, 1, 0, 0], dtype=np.uint8), 10)
        first = access_address & 1
        n = self.preamble_len
        pattern = np.empty(n, dtype=np.uint8)
        pattern[0::2] = first
        pattern[1::2] = first ^ 1
        return pattern


def raise_uncoded(mode: PhyMode):
    from .errors import ModeError

    raise ModeError(f"{mode.value} is not a coded mode")
