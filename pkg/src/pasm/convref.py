"""Golden multi-channel 2-D convolution in exact fixed-point arithmetic.

This is the reference every accelerated path is checked against: six nested
loops, "valid" boundary mode (output shrinks by K-1 per axis), stride 1, and
exact full-width products accumulated at an explicit caller-chosen format.
Output pixels are independent, so results are bit-identical regardless of
evaluation order.
"""
from __future__ import annotations

from dataclasses import dataclass
from operator import mul
from typing import Sequence

from . import instrument
from .errors import AccumulatorWidthError, FormatMismatchError, ShapeError
from .fxp import Fxp, FxpVector, QFormat, format_and_raws, shift_raw, wrap_raw


def guard_bits(n: int) -> int:
    """Extra accumulator bits so a sum of ``n`` terms cannot wrap."""
    return (n - 1).bit_length() if n > 1 else 0


@dataclass(frozen=True)
class Tensor3:
    """Width x height x channels array of fixed-point values in one format.

    ``raws`` is row-major with channels fastest:
    ``index = (x * height + y) * channels + c``.
    """

    width: int
    height: int
    channels: int
    fmt: QFormat
    raws: tuple[int, ...]

    def __post_init__(self) -> None:
        expected = self.width * self.height * self.channels
        if min(self.width, self.height, self.channels) < 1:
            raise ShapeError("tensor dims must be positive")
        if len(self.raws) != expected:
            raise ShapeError(f"tensor has {len(self.raws)} values, dims imply {expected}")

    @classmethod
    def from_raws(cls, width: int, height: int, channels: int, fmt: QFormat,
                  raws: Sequence[int]) -> "Tensor3":
        raws = tuple(raws)
        if raws and (min(raws) < fmt.raw_min or max(raws) > fmt.raw_max):
            raise ValueError(f"raw value out of range for {fmt}")
        return cls(width, height, channels, fmt, raws)

    @classmethod
    def zeros(cls, width: int, height: int, channels: int, fmt: QFormat) -> "Tensor3":
        return cls(width, height, channels, fmt, (0,) * (width * height * channels))

    def index(self, x: int, y: int, c: int) -> int:
        return (x * self.height + y) * self.channels + c

    def at(self, x: int, y: int, c: int) -> Fxp:
        return Fxp(self.raws[self.index(x, y, c)], self.fmt)


@dataclass(frozen=True)
class KernelSet:
    """Kernel stack shaped [output_channels][K][K][input_channels], row-major."""

    output_channels: int
    kernel_size: int
    input_channels: int
    fmt: QFormat
    raws: tuple[int, ...]

    def __post_init__(self) -> None:
        expected = self.output_channels * self.kernel_size ** 2 * self.input_channels
        if min(self.output_channels, self.kernel_size, self.input_channels) < 1:
            raise ShapeError("kernel dims must be positive")
        if len(self.raws) != expected:
            raise ShapeError(f"kernels have {len(self.raws)} values, dims imply {expected}")

    @classmethod
    def from_raws(cls, output_channels: int, kernel_size: int, input_channels: int,
                  fmt: QFormat, raws: Sequence[int]) -> "KernelSet":
        raws = tuple(raws)
        if raws and (min(raws) < fmt.raw_min or max(raws) > fmt.raw_max):
            raise ValueError(f"raw value out of range for {fmt}")
        return cls(output_channels, kernel_size, input_channels, fmt, raws)

    def index(self, o: int, x: int, y: int, i: int) -> int:
        k = self.kernel_size
        return ((o * k + x) * k + y) * self.input_channels + i

    def at(self, o: int, x: int, y: int, i: int) -> Fxp:
        return Fxp(self.raws[self.index(o, x, y, i)], self.fmt)


def dot_ref(images: FxpVector, weights: FxpVector, acc_fmt: QFormat) -> Fxp:
    """Sum of exact products, accumulated with wrap-around in ``acc_fmt``.

    The accumulator is deliberately unchecked: callers wanting a wrap-free
    result supply ``acc_fmt`` at product width plus ``guard_bits(n)``.
    """
    img_fmt, img_raws = format_and_raws(images)
    wt_fmt, wt_raws = format_and_raws(weights)
    if len(img_raws) != len(wt_raws):
        raise ShapeError(f"length mismatch: {len(img_raws)} images, {len(wt_raws)} weights")
    if not img_raws:
        return Fxp(0, acc_fmt)
    n = len(img_raws)
    instrument.tally(multiplies=n, adds=n)
    prod_frac = img_fmt.frac_bits + wt_fmt.frac_bits
    if acc_fmt.frac_bits == prod_frac:
        # Single wrap of the exact sum; congruent to wrapping every add.
        total = sum(map(mul, img_raws, wt_raws))
        return Fxp(wrap_raw(total, acc_fmt.total_bits), acc_fmt)
    acc = 0
    delta = acc_fmt.frac_bits - prod_frac
    bits = acc_fmt.total_bits
    for a, b in zip(img_raws, wt_raws):
        acc = wrap_raw(acc + shift_raw(a * b, delta), bits)
    return Fxp(acc, acc_fmt)


def conv2d_ref(inp: Tensor3, kernels: KernelSet, acc_fmt: QFormat) -> Tensor3:
    """Valid-mode convolution, accumulated in ``acc_fmt``, output in the input format.

    Loop order is the canonical one (output position, output channel, then
    kernel x, kernel y, input channel innermost); with a guarded accumulator
    the order is immaterial, but it is fixed for determinism.
    """
    k = kernels.kernel_size
    c = kernels.input_channels
    if inp.channels != c:
        raise ShapeError(f"channel mismatch: input has {inp.channels}, kernels expect {c}")
    if inp.width < k or inp.height < k:
        raise ShapeError(f"kernel {k}x{k} larger than input {inp.width}x{inp.height}")
    n = k * k * c
    prod_bits = inp.fmt.total_bits + kernels.fmt.total_bits
    need = prod_bits + guard_bits(n)
    if acc_fmt.total_bits < need:
        raise AccumulatorWidthError(
            f"accumulator {acc_fmt} too narrow: need {need} bits for {n} products"
        )
    prod_frac = inp.fmt.frac_bits + kernels.fmt.frac_bits
    if acc_fmt.frac_bits != prod_frac:
        raise FormatMismatchError(
            f"accumulator frac_bits must equal product frac ({prod_frac}), got {acc_fmt}"
        )

    out_w = inp.width - k + 1
    out_h = inp.height - k + 1
    oc = kernels.output_channels
    in_raws = inp.raws
    k_raws = kernels.raws
    height = inp.height
    acc_bits = acc_fmt.total_bits
    out_bits = inp.fmt.total_bits
    frac_drop = kernels.fmt.frac_bits  # acc frac -> input frac
    out: list[int] = []
    instrument.tally(multiplies=out_w * out_h * oc * n, adds=out_w * out_h * oc * n)
    for wx in range(out_w):
        for hy in range(out_h):
            for o in range(oc):
                total = 0
                kbase = o * k * k * c
                for x in range(k):
                    row = (wx + x) * height
                    for y in range(k):
                        ibase = (row + hy + y) * c
                        koff = kbase + (x * k + y) * c
                        total += sum(
                            map(mul, in_raws[ibase:ibase + c], k_raws[koff:koff + c])
                        )
                total = wrap_raw(total, acc_bits)
                out.append(wrap_raw(total >> frac_drop, out_bits))
    return Tensor3(out_w, out_h, oc, inp.fmt, tuple(out))
