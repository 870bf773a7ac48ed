"""Shared-weight codebooks: build, encode kernels to indices, decode back.

A codebook holds ``b = 2**wci`` fixed-point codewords; encoding replaces each
kernel weight with the index of its nearest codeword (ties to the lower
index), so a ``wci``-bit index travels instead of a full-width value.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence, Union

from .convref import KernelSet
from .errors import FileFormatError, FormatMismatchError, InvariantError, ShapeError
from .fxp import Fxp, FxpVector, QFormat, format_and_raws, from_real

METHOD_UNIFORM = "uniform-range"
METHOD_KMEANS = "lloyd-kmeans"
METHODS = (METHOD_UNIFORM, METHOD_KMEANS)

MAX_WCI = 8
_KMEANS_MAX_ITER = 100


@dataclass(frozen=True)
class Codebook:
    """``b = 2**wci`` shared weight values, all in one format."""

    weights: tuple[Fxp, ...]
    wci: int

    def __post_init__(self) -> None:
        if not 1 <= self.wci <= MAX_WCI:
            raise InvariantError(f"wci must be in [1, {MAX_WCI}], got {self.wci}")
        if len(self.weights) != 1 << self.wci:
            raise InvariantError(
                f"codebook must have 2**wci = {1 << self.wci} entries, got {len(self.weights)}"
            )
        fmt = self.weights[0].fmt
        if any(w.fmt != fmt for w in self.weights):
            raise FormatMismatchError("codewords must share one format")

    @property
    def b(self) -> int:
        return len(self.weights)

    @property
    def fmt(self) -> QFormat:
        return self.weights[0].fmt

    @property
    def raws(self) -> list[int]:
        return [w.raw for w in self.weights]


@dataclass(frozen=True)
class EncodedKernels:
    """Kernel stack with each weight replaced by a codebook index."""

    output_channels: int
    kernel_size: int
    input_channels: int
    indices: tuple[int, ...]
    codebook: Codebook

    def __post_init__(self) -> None:
        expected = self.output_channels * self.kernel_size ** 2 * self.input_channels
        if len(self.indices) != expected:
            raise ShapeError(f"{len(self.indices)} indices, dims imply {expected}")
        if self.indices and (min(self.indices) < 0 or max(self.indices) >= self.codebook.b):
            raise InvariantError("index out of range for codebook")

    def index(self, o: int, x: int, y: int, i: int) -> int:
        k = self.kernel_size
        return ((o * k + x) * k + y) * self.input_channels + i


def _wci_for(b: int) -> int:
    if b < 2 or b & (b - 1):
        raise InvariantError(f"b must be a power of two in [2, {1 << MAX_WCI}], got {b}")
    wci = b.bit_length() - 1
    if wci > MAX_WCI:
        raise InvariantError(f"b must be a power of two in [2, {1 << MAX_WCI}], got {b}")
    return wci


def _nearest(raw: int, cw_raws: Sequence[int]) -> int:
    # Tie rule: smallest distance, then lowest index.
    return min(range(len(cw_raws)), key=lambda k: (abs(raw - cw_raws[k]), k))


def _quantize_raw(value: Fraction, fmt: QFormat) -> int:
    raw = from_real(value, fmt).raw
    return min(max(raw, fmt.raw_min), fmt.raw_max)


def _uniform_range_raws(points: Sequence[int], b: int, fmt: QFormat) -> list[int]:
    lo, hi = min(points), max(points)
    if lo == hi:
        return [lo] * b
    span = Fraction(hi - lo, fmt.scale)
    base = Fraction(lo, fmt.scale)
    return [_quantize_raw(base + span * (2 * k + 1) / (2 * b), fmt) for k in range(b)]


def lloyd_kmeans(points: Sequence[int], b: int, fmt: QFormat,
                 max_iter: int = _KMEANS_MAX_ITER) -> tuple[list[int], list[Fraction]]:
    """Lloyd's algorithm on raw values from uniform-range initialization.

    Returns the final codeword raws and the within-cluster squared error
    measured after each assignment step (non-increasing by construction:
    means are rounded to the nearest representable raw, and no other raw is
    closer to the true mean).  Empty clusters are reseeded at the point
    farthest from its assigned codeword.
    """
    codewords = _uniform_range_raws(points, b, fmt)
    sse_history: list[Fraction] = []
    assignment: list[int] | None = None
    for _ in range(max_iter):
        new_assignment = [_nearest(p, codewords) for p in points]
        sse_history.append(
            Fraction(sum((p - codewords[k]) ** 2 for p, k in zip(points, new_assignment)),
                     fmt.scale ** 2)
        )
        if new_assignment == assignment:
            break
        assignment = new_assignment
        sums = [0] * b
        counts = [0] * b
        for p, k in zip(points, assignment):
            sums[k] += p
            counts[k] += 1
        for k in range(b):
            if counts[k]:
                codewords[k] = _quantize_raw(Fraction(sums[k], counts[k] * fmt.scale), fmt)
        for k in range(b):
            if counts[k]:
                continue
            far = max(range(len(points)),
                      key=lambda i: (abs(points[i] - codewords[assignment[i]]), -i))
            codewords[k] = points[far]
            assignment[far] = k
            counts[k] = 1
    return codewords, sse_history


def build_codebook(weights: FxpVector, b: int, method: str = METHOD_UNIFORM) -> Codebook:
    """Cluster weight values into ``b`` codewords.

    ``uniform-range`` places codewords at the centers of ``b`` equal-width
    intervals spanning [min, max]; ``lloyd-kmeans`` refines that start with
    Lloyd iterations until the assignment stops changing.  A degenerate input
    (all values equal) yields ``b`` copies of the value.
    """
    wci = _wci_for(b)
    fmt, raws = format_and_raws(weights)
    if not raws:
        raise InvariantError("cannot build a codebook from no weights")
    if method == METHOD_UNIFORM:
        cw = _uniform_range_raws(raws, b, fmt)
    elif method == METHOD_KMEANS:
        cw, _ = lloyd_kmeans(raws, b, fmt)
    else:
        raise InvariantError(f"unknown method {method!r}, expected one of {METHODS}")
    return Codebook(tuple(Fxp(r, fmt) for r in cw), wci)


def encode(kernels: KernelSet, cb: Codebook) -> EncodedKernels:
    """Map every kernel weight to its nearest codeword index."""
    if kernels.fmt != cb.fmt:
        raise FormatMismatchError(f"kernels are {kernels.fmt}, codebook is {cb.fmt}")
    cw = cb.raws
    indices = tuple(_nearest(r, cw) for r in kernels.raws)
    return EncodedKernels(kernels.output_channels, kernels.kernel_size,
                          kernels.input_channels, indices, cb)


def decode(enc: EncodedKernels) -> KernelSet:
    """Pointwise codebook lookup back to a full-width kernel stack."""
    cw = enc.codebook.raws
    return KernelSet(enc.output_channels, enc.kernel_size, enc.input_channels,
                     enc.codebook.fmt, tuple(cw[i] for i in enc.indices))


def quantization_errors(weights: FxpVector, cb: Codebook) -> tuple[Fraction, Fraction]:
    """(max, mean) absolute error of nearest-codeword quantization."""
    fmt, raws = format_and_raws(weights)
    if not raws:
        raise InvariantError("no weights")
    if fmt != cb.fmt:
        raise FormatMismatchError(f"weights are {fmt}, codebook is {cb.fmt}")
    cw = cb.raws
    errs = [abs(r - cw[_nearest(r, cw)]) for r in raws]
    return (Fraction(max(errs), fmt.scale),
            Fraction(sum(errs), len(errs) * fmt.scale))


def write_codebook_csv(path: Union[str, Path], cb: Codebook) -> None:
    """Serialize as ``index,raw,value`` rows, indices ascending."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "raw", "value"])
        for k, w in enumerate(cb.weights):
            writer.writerow([k, w.raw, w.decimal()])


def read_codebook_csv(path: Union[str, Path], fmt: QFormat) -> Codebook:
    """Load a codebook CSV; the raw column is authoritative, value is checked."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    if not rows or rows[0] != ["index", "raw", "value"]:
        raise FileFormatError(f"{path}: expected header 'index,raw,value'")
    raws: list[int] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise FileFormatError(f"{path}:{lineno}: expected 3 columns")
        try:
            idx, raw, value = int(row[0]), int(row[1]), Fraction(row[2])
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: {exc}") from exc
        if idx != lineno - 2:
            raise FileFormatError(f"{path}:{lineno}: indices must ascend from 0")
        if value * fmt.scale != raw:
            raise FileFormatError(f"{path}:{lineno}: value column disagrees with raw under {fmt}")
        raws.append(raw)
    b = len(raws)
    wci = _wci_for(b)
    return Codebook(tuple(Fxp(r, fmt) for r in raws), wci)
