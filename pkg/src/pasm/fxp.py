"""Two's-complement fixed-point scalars with explicit width and fraction bits.

A value is a raw signed integer ``raw`` interpreted as ``raw / 2**frac_bits``
under a :class:`QFormat`.  Addition wraps modulo ``2**total_bits`` exactly as
a hardware adder would; multiplication is exact at full double width; resizing
truncates fraction bits toward negative infinity (arithmetic shift) and wraps
integer bits.  Every operation is a pure function over immutable values, so
instances may be shared freely between threads.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union

from . import instrument
from .errors import FormatMismatchError, RangeOverflowError

# Wide enough for 32-bit operands squared plus guard bits on desk-scale sums.
MAX_TOTAL_BITS = 128

_QFORMAT_RE = re.compile(r"^[Qq](\d+)\.(\d+)$")

RealLike = Union[int, float, Fraction, str]


@dataclass(frozen=True)
class QFormat:
    """Fixed-point encoding: ``total_bits`` wide (incl. sign), ``frac_bits`` fractional."""

    total_bits: int
    frac_bits: int

    def __post_init__(self) -> None:
        if not 2 <= self.total_bits <= MAX_TOTAL_BITS:
            raise ValueError(
                f"total_bits must be in [2, {MAX_TOTAL_BITS}], got {self.total_bits}"
            )
        if not 0 <= self.frac_bits < self.total_bits:
            raise ValueError(
                f"frac_bits must be in [0, total_bits), got {self.frac_bits}"
            )

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def step(self) -> Fraction:
        """Value of one least-significant bit."""
        return Fraction(1, self.scale)

    @classmethod
    def parse(cls, text: str) -> "QFormat":
        """Parse the flag syntax ``Qw.f``, e.g. ``Q24.8``."""
        m = _QFORMAT_RE.match(text.strip())
        if m is None:
            raise ValueError(f"bad Q-format {text!r}, expected 'Qw.f' like 'Q24.8'")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self) -> str:
        return f"Q{self.total_bits}.{self.frac_bits}"


def wrap_raw(raw: int, total_bits: int) -> int:
    """Fold an integer into the signed range of ``total_bits`` (two's-complement wrap)."""
    raw &= (1 << total_bits) - 1
    if raw >= 1 << (total_bits - 1):
        raw -= 1 << total_bits
    return raw


@dataclass(frozen=True)
class Fxp:
    """One fixed-point value: a raw two's-complement integer plus its format."""

    raw: int
    fmt: QFormat

    def __post_init__(self) -> None:
        if not self.fmt.raw_min <= self.raw <= self.fmt.raw_max:
            raise ValueError(f"raw {self.raw} not representable in {self.fmt}")

    @property
    def value(self) -> float:
        return self.raw / self.fmt.scale

    def exact(self) -> Fraction:
        return Fraction(self.raw, self.fmt.scale)

    def decimal(self) -> str:
        """Exact decimal rendering (every dyadic rational terminates)."""
        f = self.fmt.frac_bits
        if f == 0:
            return str(self.raw)
        sign = "-" if self.raw < 0 else ""
        ip, rem = divmod(abs(self.raw), 1 << f)
        digits = str(rem * 5**f).rjust(f, "0").rstrip("0")
        return f"{sign}{ip}.{digits}" if digits else f"{sign}{ip}"

    def __str__(self) -> str:
        return f"{self.decimal()} ({self.fmt})"


def zero(fmt: QFormat) -> Fxp:
    return Fxp(0, fmt)


def _round_half_away(q: Fraction) -> int:
    if q >= 0:
        return int((2 * q + 1) // 2)
    return -int((2 * -q + 1) // 2)


def from_real(x: RealLike, fmt: QFormat) -> Fxp:
    """Quantize a real number, rounding half away from zero.

    Raises :class:`RangeOverflowError` when the rounded raw falls outside the
    representable range.  Accepts ints, floats, Fractions, and decimal strings
    (strings are exact, floats contribute their binary value).
    """
    raw = _round_half_away(Fraction(x) * fmt.scale)
    if not fmt.raw_min <= raw <= fmt.raw_max:
        raise RangeOverflowError(f"{x!r} does not fit in {fmt}")
    return Fxp(raw, fmt)


def add(a: Fxp, b: Fxp) -> Fxp:
    """Wrap-around sum; both operands must share one format."""
    if a.fmt != b.fmt:
        raise FormatMismatchError(f"cannot add {a.fmt} to {b.fmt}")
    instrument.tally(adds=1)
    return Fxp(wrap_raw(a.raw + b.raw, a.fmt.total_bits), a.fmt)


def mul_full(a: Fxp, b: Fxp) -> Fxp:
    """Exact product at full width ``Q{wa+wb, fa+fb}``; never rounds or overflows."""
    fmt = QFormat(
        a.fmt.total_bits + b.fmt.total_bits, a.fmt.frac_bits + b.fmt.frac_bits
    )
    instrument.tally(multiplies=1)
    return Fxp(a.raw * b.raw, fmt)


def shift_raw(raw: int, frac_delta: int) -> int:
    """Re-align fraction bits: left shift widens, right shift floors toward -inf."""
    if frac_delta >= 0:
        return raw << frac_delta
    return raw >> -frac_delta


def resize(a: Fxp, fmt: QFormat) -> Fxp:
    """Change format: fraction bits by arithmetic shift, width by two's-complement wrap."""
    r = shift_raw(a.raw, fmt.frac_bits - a.fmt.frac_bits)
    return Fxp(wrap_raw(r, fmt.total_bits), fmt)


def resize_checked(a: Fxp, fmt: QFormat) -> Fxp:
    """Like :func:`resize` but raises when integer bits would be lost to wrapping."""
    r = shift_raw(a.raw, fmt.frac_bits - a.fmt.frac_bits)
    wrapped = wrap_raw(r, fmt.total_bits)
    if wrapped != r:
        raise RangeOverflowError(f"{a} does not fit in {fmt}")
    return Fxp(wrapped, fmt)


class FxpArray:
    """A 1-D run of fixed-point values sharing one format.

    Stores raw integers flat, which keeps bulk arithmetic cheap; elements come
    back out as :class:`Fxp` scalars.  Treat the instance as immutable.
    """

    __slots__ = ("fmt", "raws")

    def __init__(self, fmt: QFormat, raws: Sequence[int], *, validate: bool = True):
        raws = list(raws)
        if validate and raws:
            if min(raws) < fmt.raw_min or max(raws) > fmt.raw_max:
                raise ValueError(f"raw value out of range for {fmt}")
        self.fmt = fmt
        self.raws = raws

    @classmethod
    def from_reals(cls, values: Iterable[RealLike], fmt: QFormat) -> "FxpArray":
        return cls(fmt, [from_real(v, fmt).raw for v in values], validate=False)

    @classmethod
    def from_fxps(cls, items: Iterable[Fxp]) -> "FxpArray":
        items = list(items)
        if not items:
            raise ValueError("cannot infer format from an empty sequence")
        fmt = items[0].fmt
        for it in items[1:]:
            if it.fmt != fmt:
                raise FormatMismatchError("mixed formats in fixed-point sequence")
        return cls(fmt, [it.raw for it in items], validate=False)

    def __len__(self) -> int:
        return len(self.raws)

    def __getitem__(self, i: int) -> Fxp:
        return Fxp(self.raws[i], self.fmt)

    def __iter__(self) -> Iterator[Fxp]:
        fmt = self.fmt
        return (Fxp(r, fmt) for r in self.raws)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FxpArray):
            return NotImplemented
        return self.fmt == other.fmt and self.raws == other.raws


FxpVector = Union[FxpArray, Sequence[Fxp]]


def format_and_raws(values: FxpVector) -> tuple[QFormat | None, list[int]]:
    """Normalize a scalar sequence or array to ``(shared format, raw list)``.

    Empty inputs carry no format and return ``(None, [])``.  The returned list
    aliases FxpArray storage and must not be mutated.
    """
    if isinstance(values, FxpArray):
        return values.fmt, values.raws
    values = list(values)
    if not values:
        return None, []
    arr = FxpArray.from_fxps(values)
    return arr.fmt, arr.raws
