"""Bin-accumulate dot products and their weight-shared MAC baseline.

The accelerated path splits a weight-shared dot product into two phases:

1. accumulate: each incoming image value is added (wrap-around) into the
   accumulator bin selected by its weight index, an index-and-add with no
   multiplier involved;
2. multiply: each of the ``b`` bins is multiplied by its shared weight once
   and the ``b`` products are totalled, so the multiplier count is ``b``
   regardless of how many inputs streamed through phase 1.

With accumulators wide enough for the guard-bit rule the result is bit-equal
to the direct weight-shared MAC and to the exact reference dot product; with
deliberately narrow formats all paths still agree because fixed-width
two's-complement arithmetic wraps consistently.

Frequency counting (how often each weight index occurs) is the special case
``image == 1`` in an integer format; there is no separate counting path.

States are values: accumulate returns a new state and never mutates its
input, so independent units can run on any number of threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import instrument
from .codebook import Codebook, EncodedKernels
from .convref import Tensor3, guard_bits
from .errors import (
    AccumulatorWidthError,
    FormatMismatchError,
    InvariantError,
    ShapeError,
)
from .fxp import Fxp, FxpVector, QFormat, format_and_raws, shift_raw, wrap_raw


@dataclass(frozen=True)
class PasState:
    """The ``b`` accumulator bins of one parallel-accumulate unit."""

    bins: tuple[int, ...]
    acc_fmt: QFormat

    @property
    def b(self) -> int:
        return len(self.bins)

    def bin_value(self, k: int) -> Fxp:
        return Fxp(self.bins[k], self.acc_fmt)


@dataclass(frozen=True)
class WsMacState:
    """Single accumulator of a weight-shared MAC plus its weights table."""

    acc: Fxp
    codebook: Codebook


def pas_reset(b: int, acc_fmt: QFormat) -> PasState:
    """Fresh state with all ``b`` bins zero; ``b`` must be a power of two >= 2."""
    if b < 2 or b & (b - 1):
        raise InvariantError(f"b must be a power of two >= 2, got {b}")
    return PasState((0,) * b, acc_fmt)


def pas_accumulate(state: PasState, image: Fxp, bin_index: int) -> PasState:
    """Add one image value into the selected bin; all other bins unchanged."""
    if not 0 <= bin_index < state.b:
        raise IndexError(f"bin index {bin_index} out of range for b={state.b}")
    if image.fmt.frac_bits != state.acc_fmt.frac_bits:
        raise FormatMismatchError(
            f"image frac_bits {image.fmt.frac_bits} != accumulator {state.acc_fmt.frac_bits}"
        )
    instrument.tally(adds=1, bin_writes=1)
    bins = list(state.bins)
    bins[bin_index] = wrap_raw(bins[bin_index] + image.raw, state.acc_fmt.total_bits)
    return PasState(tuple(bins), state.acc_fmt)


def _product_fmt(acc_fmt: QFormat, weight_fmt: QFormat) -> QFormat:
    return QFormat(acc_fmt.total_bits + weight_fmt.total_bits,
                   acc_fmt.frac_bits + weight_fmt.frac_bits)


def _multiply_phase_raw(bins: Sequence[int], cw_raws: Sequence[int],
                        acc_fmt: QFormat, weight_fmt: QFormat,
                        out_fmt: QFormat) -> int:
    prod_fmt = _product_fmt(acc_fmt, weight_fmt)
    total = 0
    for v, w in zip(bins, cw_raws):
        total += v * w
    total = wrap_raw(total, prod_fmt.total_bits)
    total = shift_raw(total, out_fmt.frac_bits - prod_fmt.frac_bits)
    return wrap_raw(total, out_fmt.total_bits)


def pasm_multiply_phase(state: PasState, cb: Codebook, out_fmt: QFormat) -> Fxp:
    """Multiply each bin by its shared weight, total in ascending bin order.

    Exactly ``b`` multiplications are performed; products are exact and the
    running total wraps at full product width before the final resize.
    """
    if cb.b != state.b:
        raise ShapeError(f"codebook has {cb.b} entries, state has {state.b} bins")
    instrument.tally(multiplies=state.b, adds=state.b)
    raw = _multiply_phase_raw(state.bins, cb.raws, state.acc_fmt, cb.fmt, out_fmt)
    return Fxp(raw, out_fmt)


def _check_stream(img_raws: Sequence[int], indices: Sequence[int], b: int) -> None:
    if len(img_raws) != len(indices):
        raise ShapeError(
            f"length mismatch: {len(img_raws)} images, {len(indices)} bin indices"
        )
    if indices and (min(indices) < 0 or max(indices) >= b):
        raise IndexError(f"bin index out of range for b={b}")


def pasm_dot(images: FxpVector, bin_indices: Sequence[int], cb: Codebook,
             acc_fmt: QFormat, out_fmt: QFormat) -> Fxp:
    """Two-phase dot product: bin-accumulate every image value, then multiply.

    Equivalent to ``pas_reset`` + a fold of ``pas_accumulate`` +
    ``pasm_multiply_phase``, just without per-step state copies.
    """
    img_fmt, img_raws = format_and_raws(images)
    _check_stream(img_raws, bin_indices, cb.b)
    if img_fmt is not None and img_fmt.frac_bits != acc_fmt.frac_bits:
        raise FormatMismatchError(
            f"image frac_bits {img_fmt.frac_bits} != accumulator {acc_fmt.frac_bits}"
        )
    n = len(img_raws)
    bins = [0] * cb.b
    for raw, k in zip(img_raws, bin_indices):
        bins[k] += raw
    acc_bits = acc_fmt.total_bits
    bins = [wrap_raw(v, acc_bits) for v in bins]
    instrument.tally(adds=n + cb.b, bin_writes=n, multiplies=cb.b)
    raw = _multiply_phase_raw(bins, cb.raws, acc_fmt, cb.fmt, out_fmt)
    return Fxp(raw, out_fmt)


def ws_mac_dot(images: FxpVector, bin_indices: Sequence[int], cb: Codebook,
               acc_fmt: QFormat, out_fmt: QFormat) -> Fxp:
    """Baseline: look up each weight by index, multiply, accumulate, resize.

    One multiplication per input element.  Each exact product is resized into
    ``acc_fmt`` before the wrap-around add; choose ``acc_fmt`` at product
    fraction width for lossless accumulation.
    """
    img_fmt, img_raws = format_and_raws(images)
    _check_stream(img_raws, bin_indices, cb.b)
    n = len(img_raws)
    instrument.tally(multiplies=n, adds=n)
    if not img_raws:
        return Fxp(0, out_fmt)
    cw = cb.raws
    prod_frac = img_fmt.frac_bits + cb.fmt.frac_bits
    acc_bits = acc_fmt.total_bits
    if acc_fmt.frac_bits == prod_frac:
        total = 0
        for raw, k in zip(img_raws, bin_indices):
            total += raw * cw[k]
        acc = wrap_raw(total, acc_bits)
    else:
        delta = acc_fmt.frac_bits - prod_frac
        acc = 0
        for raw, k in zip(img_raws, bin_indices):
            acc = wrap_raw(acc + shift_raw(raw * cw[k], delta), acc_bits)
    out = shift_raw(acc, out_fmt.frac_bits - acc_fmt.frac_bits)
    return Fxp(wrap_raw(out, out_fmt.total_bits), out_fmt)


def pasm_conv2d(inp: Tensor3, enc: EncodedKernels, cb: Codebook,
                acc_fmt: QFormat, out_fmt: QFormat) -> Tensor3:
    """Valid-mode convolution over encoded kernels via the two-phase path.

    Per output element: reset bins, stream the K*K*c window values into the
    bins their kernel indices select, run the multiply phase, resize to the
    input format.  Bit-equal to the reference convolution of the decoded
    kernels whenever the guard-bit rule holds (enforced here).
    """
    k = enc.kernel_size
    c = enc.input_channels
    if cb.b != enc.codebook.b or cb.fmt != enc.codebook.fmt:
        raise ShapeError("codebook does not match the one the kernels were encoded with")
    if inp.channels != c:
        raise ShapeError(f"channel mismatch: input has {inp.channels}, kernels expect {c}")
    if inp.width < k or inp.height < k:
        raise ShapeError(f"kernel {k}x{k} larger than input {inp.width}x{inp.height}")
    n = k * k * c
    if acc_fmt.frac_bits != inp.fmt.frac_bits:
        raise FormatMismatchError(
            f"bin frac_bits {acc_fmt.frac_bits} != image frac_bits {inp.fmt.frac_bits}"
        )
    need_acc = inp.fmt.total_bits + guard_bits(n)
    if acc_fmt.total_bits < need_acc:
        raise AccumulatorWidthError(
            f"bin accumulator {acc_fmt} too narrow: need {need_acc} bits for {n} adds"
        )
    need_out = acc_fmt.total_bits + cb.fmt.total_bits + guard_bits(cb.b)
    if out_fmt.total_bits < need_out:
        raise AccumulatorWidthError(
            f"output accumulator {out_fmt} too narrow: need {need_out} bits for {cb.b} products"
        )
    prod_frac = acc_fmt.frac_bits + cb.fmt.frac_bits
    if not inp.fmt.frac_bits <= out_fmt.frac_bits <= prod_frac:
        raise FormatMismatchError(
            f"out frac_bits must lie in [{inp.fmt.frac_bits}, {prod_frac}], got {out_fmt}"
        )

    b = cb.b
    out_w = inp.width - k + 1
    out_h = inp.height - k + 1
    oc = enc.output_channels
    in_raws = inp.raws
    idx = enc.indices
    cw = cb.raws
    height = inp.height
    acc_bits = acc_fmt.total_bits
    prod_bits = acc_fmt.total_bits + cb.fmt.total_bits
    out_shift = out_fmt.frac_bits - prod_frac  # <= 0
    final_shift = inp.fmt.frac_bits - out_fmt.frac_bits  # <= 0
    out_bits_final = inp.fmt.total_bits
    out: list[int] = []
    outputs = out_w * out_h * oc
    instrument.tally(adds=outputs * (n + b), bin_writes=outputs * n,
                     multiplies=outputs * b)
    for wx in range(out_w):
        for hy in range(out_h):
            for o in range(oc):
                bins = [0] * b
                kbase = o * k * k * c
                for x in range(k):
                    row = (wx + x) * height
                    for y in range(k):
                        ibase = (row + hy + y) * c
                        koff = kbase + (x * k + y) * c
                        for i in range(c):
                            bins[idx[koff + i]] += in_raws[ibase + i]
                total = 0
                for v, w in zip(bins, cw):
                    total += wrap_raw(v, acc_bits) * w
                total = wrap_raw(total, prod_bits)
                total = wrap_raw(shift_raw(total, out_shift), out_fmt.total_bits)
                out.append(wrap_raw(shift_raw(total, final_shift), out_bits_final))
    return Tensor3(out_w, out_h, oc, inp.fmt, tuple(out))
