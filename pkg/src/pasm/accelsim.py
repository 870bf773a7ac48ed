"""Deterministic cycle model of the two evaluated accelerator organizations.

Two organizations are modeled.  The direct one feeds 4 image and 4 weight
inputs per cycle to 16 weight-shared MAC units (an all-pairs distribution, the
only mapping that turns 4+4 inputs into 16 ops).  The proposed one replaces
the MACs with 16 parallel-accumulate units whose bins drain through 4 shared
post-pass MACs, one bin per cycle, each MAC serially draining its statically
assigned group of units.

Workload mapping: each output element needs ``n = K*K*c`` accumulations; a
batch of ``min(units, input pairs per cycle)`` output elements proceeds in
lockstep, one input pair per unit per cycle, so a batch accumulates in ``n``
cycles.  Non-overlapped, a batch then spends ``(n_pas/n_mac) * b`` cycles in
the post-pass; with double-buffered bins the drain of one batch hides behind
the accumulation of the next.  Bin reset is modeled as a zero-cycle register
clear.  No memory hierarchy or stalls: this is a compute-side model only.

Everything is a pure function of the config and workload; identical inputs
give identical reports on any thread.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import core
from .codebook import Codebook, EncodedKernels
from .convref import Tensor3
from .errors import BandwidthError, InvariantError
from .fxp import FxpArray, QFormat, resize

MODE_DIRECT = "direct-mac"
MODE_PAS_SHARED = "pas-shared-mac"
MODES = (MODE_DIRECT, MODE_PAS_SHARED)


@dataclass(frozen=True)
class AccelConfig:
    n_pas_units: int
    n_mac_units: int
    image_inputs_per_cycle: int
    weight_inputs_per_cycle: int
    b: int
    w: int
    mode: str
    overlap_postpass: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise InvariantError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.b < 2 or self.b & (self.b - 1):
            raise InvariantError(f"b must be a power of two, got {self.b}")
        if self.w < 2:
            raise InvariantError(f"bit width must be at least 2, got {self.w}")
        if min(self.image_inputs_per_cycle, self.weight_inputs_per_cycle) < 1:
            raise InvariantError("input bandwidth must be at least one value per cycle")
        if self.mode == MODE_DIRECT:
            if self.n_pas_units != 0:
                raise InvariantError("direct-mac mode has no accumulate units")
            if self.n_mac_units < 1:
                raise InvariantError("direct-mac mode needs at least one MAC")
        else:
            if not self.n_pas_units >= self.n_mac_units >= 1:
                raise InvariantError("need n_pas_units >= n_mac_units >= 1")
            if self.n_pas_units % self.n_mac_units:
                raise InvariantError("n_pas_units must be divisible by n_mac_units")

    @property
    def units(self) -> int:
        return self.n_mac_units if self.mode == MODE_DIRECT else self.n_pas_units

    @property
    def pairs_per_cycle(self) -> int:
        return self.image_inputs_per_cycle * self.weight_inputs_per_cycle


def config_16_mac(b: int = 16, w: int = 32) -> AccelConfig:
    """The baseline: 16 weight-shared MACs fed 4 image + 4 weight inputs/cycle."""
    return AccelConfig(0, 16, 4, 4, b, w, MODE_DIRECT)


def config_16_pas_4_mac(b: int = 16, w: int = 32, overlap: bool = False) -> AccelConfig:
    """The proposed organization: 16 accumulate units sharing 4 post-pass MACs."""
    return AccelConfig(16, 4, 4, 4, b, w, MODE_PAS_SHARED, overlap)

NAMED_CONFIGS = {"16-mac": config_16_mac, "16-pas-4-mac": config_16_pas_4_mac}


@dataclass(frozen=True)
class LayerShape:
    width: int
    height: int
    kernel_size: int
    in_channels: int
    out_channels: int

    def __post_init__(self) -> None:
        if min(self.width, self.height, self.kernel_size,
               self.in_channels, self.out_channels) < 1:
            raise InvariantError("layer dims must be positive")
        if self.kernel_size > min(self.width, self.height):
            raise InvariantError(
                f"kernel {self.kernel_size} larger than input "
                f"{self.width}x{self.height}"
            )

    @property
    def out_width(self) -> int:
        return self.width - self.kernel_size + 1

    @property
    def out_height(self) -> int:
        return self.height - self.kernel_size + 1

    @property
    def outputs(self) -> int:
        return self.out_width * self.out_height * self.out_channels

    @property
    def macs_per_output(self) -> int:
        return self.kernel_size ** 2 * self.in_channels


@dataclass(frozen=True)
class CycleReport:
    accumulate_cycles: int
    postpass_cycles: int
    total_cycles: int
    ops_executed: int
    util_pas: Fraction
    util_mac: Fraction


def simulate_dot(config: AccelConfig, n: int) -> CycleReport:
    """Single-unit latency of one ``n``-input dot product.

    Direct mode: one MAC, one pair per cycle, ``n`` cycles.  Shared mode: one
    accumulate unit feeds one post-pass MAC that drains all ``b`` bins, for
    ``n + b`` cycles regardless of overlap (a lone dot has nothing to overlap
    with).
    """
    if n < 0:
        raise InvariantError(f"n must be non-negative, got {n}")
    if config.mode == MODE_DIRECT:
        util = Fraction(1) if n else Fraction(0)
        return CycleReport(n, 0, n, n, Fraction(0), util)
    b = config.b
    total = n + b
    return CycleReport(n, b, total, n,
                       Fraction(n, total), Fraction(b, total))


def _batches(outputs: int, lanes: int) -> int:
    return -(-outputs // lanes)


def simulate_layer(config: AccelConfig, layer: LayerShape) -> CycleReport:
    """Cycle tally for a whole layer under the batch mapping rule."""
    pairs = config.pairs_per_cycle
    if pairs > config.units:
        raise BandwidthError(
            f"{pairs} ops/cycle demanded but only {config.units} units available"
        )
    n = layer.macs_per_output
    outputs = layer.outputs
    lanes = min(config.units, pairs)
    batches = _batches(outputs, lanes)
    acc = batches * n
    ops = outputs * n
    if config.mode == MODE_DIRECT:
        total = acc
        util_mac = Fraction(ops, config.n_mac_units * total) if total else Fraction(0)
        return CycleReport(acc, 0, total, ops, Fraction(0), util_mac)
    drain = (config.n_pas_units // config.n_mac_units) * config.b
    post = batches * drain
    if config.overlap_postpass and batches:
        total = n + (batches - 1) * max(n, drain) + drain
    else:
        total = acc + post
    util_pas = Fraction(ops, config.n_pas_units * total) if total else Fraction(0)
    util_mac = (Fraction(outputs * config.b, config.n_mac_units * total)
                if total else Fraction(0))
    return CycleReport(acc, post, total, ops, util_pas, util_mac)


def simulate_layer_checked(config: AccelConfig, inp: Tensor3, enc: EncodedKernels,
                           cb: Codebook, acc_fmt: QFormat,
                           out_fmt: QFormat) -> tuple[CycleReport, Tensor3]:
    """Run the schedule carrying real data; outputs must bit-match the functional path.

    Output elements are computed batch by batch in lane order, exactly as the
    cycle tally assumes.  Shared mode drives the two-phase path per element,
    direct mode the weight-shared MAC baseline; either way the arithmetic is
    the same fixed-point math the functional operators use.
    """
    layer = LayerShape(inp.width, inp.height, enc.kernel_size,
                       enc.input_channels, enc.output_channels)
    report = simulate_layer(config, layer)
    k = enc.kernel_size
    lanes = min(config.units, config.pairs_per_cycle)
    order = [(wx, hy, o)
             for wx in range(layer.out_width)
             for hy in range(layer.out_height)
             for o in range(enc.output_channels)]
    out_raws = [0] * len(order)
    fmt_i = inp.fmt
    for start in range(0, len(order), lanes):
        for flat, (wx, hy, o) in enumerate(order[start:start + lanes], start):
            window = []
            indices = []
            for x in range(k):
                for y in range(k):
                    for i in range(enc.input_channels):
                        window.append(inp.raws[inp.index(wx + x, hy + y, i)])
                        indices.append(enc.indices[enc.index(o, x, y, i)])
            arr = FxpArray(fmt_i, window, validate=False)
            if config.mode == MODE_PAS_SHARED:
                r = core.pasm_dot(arr, indices, cb, acc_fmt, out_fmt)
            else:
                r = core.ws_mac_dot(arr, indices, cb, acc_fmt, out_fmt)
            out_raws[flat] = resize(r, fmt_i).raw
    tensor = Tensor3(layer.out_width, layer.out_height, enc.output_channels,
                     fmt_i, tuple(out_raws))
    return report, tensor


@dataclass(frozen=True)
class ComparisonReport:
    """Both cycle reports plus (candidate total - baseline total) / baseline total."""

    baseline: CycleReport
    candidate: CycleReport
    overhead: Fraction


def compare_configs(cfg_a: AccelConfig, cfg_b: AccelConfig,
                    layer: LayerShape) -> ComparisonReport:
    """Run one layer through both configs; overhead is relative to the first."""
    ra = simulate_layer(cfg_a, layer)
    rb = simulate_layer(cfg_b, layer)
    overhead = (Fraction(rb.total_cycles - ra.total_cycles, ra.total_cycles)
                if ra.total_cycles else Fraction(0))
    return ComparisonReport(ra, rb, overhead)


REPORT_COLUMNS = [
    "mode", "w", "b", "n_pas", "n_mac", "K", "c", "out_ch", "width", "height",
    "acc_cycles", "post_cycles", "total_cycles", "util_pas", "util_mac",
    "overlap",
]


def report_row(config: AccelConfig, layer: LayerShape, report: CycleReport) -> dict:
    """One CSV row in the report schema (single-dot runs encode n as a 1x1xn layer)."""
    return {
        "mode": config.mode,
        "w": config.w,
        "b": config.b,
        "n_pas": config.n_pas_units,
        "n_mac": config.n_mac_units,
        "K": layer.kernel_size,
        "c": layer.in_channels,
        "out_ch": layer.out_channels,
        "width": layer.width,
        "height": layer.height,
        "acc_cycles": report.accumulate_cycles,
        "post_cycles": report.postpass_cycles,
        "total_cycles": report.total_cycles,
        "util_pas": report.util_pas,
        "util_mac": report.util_mac,
        "overlap": int(config.overlap_postpass),
    }


def dot_layer(n: int) -> LayerShape:
    """Degenerate layer describing a single ``n``-input dot product."""
    return LayerShape(1, 1, 1, max(n, 1), 1)
