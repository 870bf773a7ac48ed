"""Seeded random workload generation.

A plain 64-bit linear congruential generator (Knuth's MMIX multiplier) keeps
CLI workloads reproducible across platforms and language runtimes: same seed,
same bytes out.  Statistical quality is secondary to determinism here, so the
simple modulo reduction is fine; the weak low bits are avoided by drawing from
the top of the state word.
"""
from __future__ import annotations

from .fxp import QFormat

_MULT = 6364136223846793005
_INC = 1442695040888963407
_MASK = (1 << 64) - 1


class Lcg64:
    def __init__(self, seed: int):
        self.state = (seed ^ 0x9E3779B97F4A7C15) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state * _MULT + _INC) & _MASK
        return self.state

    def bits(self, k: int) -> int:
        """Top ``k`` bits of the next state word, 0 <= result < 2**k."""
        return self.next_u64() >> (64 - k)

    def below(self, n: int) -> int:
        """Uniform-ish integer in [0, n)."""
        return self.next_u64() % n

    def raw_headroom(self, fmt: QFormat) -> int:
        """Raw value uniform over a quarter of the representable range.

        The quarter-range scaling leaves two integer bits of headroom so that
        randomly generated workloads survive products and short sums without
        saturating their natural formats.
        """
        lo = fmt.raw_min // 4
        hi = fmt.raw_max // 4
        return lo + self.below(hi - lo + 1)
