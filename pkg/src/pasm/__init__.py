"""Bit-exact building blocks for weight-shared CNN convolution hardware.

The package pairs a parallel-accumulate dot-product path (bin the image
values by weight index first, multiply each bin by its shared weight once
afterwards) with the direct weight-shared MAC it must match bit for bit, a
golden convolution reference, a cycle-level model of the two evaluated
accelerator organizations, and an analytical gate-count model.
"""

from .accelsim import (
    AccelConfig,
    ComparisonReport,
    CycleReport,
    LayerShape,
    compare_configs,
    config_16_mac,
    config_16_pas_4_mac,
    simulate_dot,
    simulate_layer,
    simulate_layer_checked,
)
from .codebook import (
    Codebook,
    EncodedKernels,
    build_codebook,
    decode,
    encode,
    quantization_errors,
    read_codebook_csv,
    write_codebook_csv,
)
from .convref import KernelSet, Tensor3, conv2d_ref, dot_ref, guard_bits
from .core import (
    PasState,
    WsMacState,
    pas_accumulate,
    pas_reset,
    pasm_conv2d,
    pasm_dot,
    pasm_multiply_phase,
    ws_mac_dot,
)
from .costmodel import (
    CostReport,
    GateConstants,
    config_gates,
    fit_constants,
    macs_per_output,
    sweep,
    unit_gates,
)
from .errors import (
    AccumulatorWidthError,
    BandwidthError,
    FileFormatError,
    FormatMismatchError,
    InvariantError,
    PasmError,
    RangeOverflowError,
    ShapeError,
)
from .fxp import Fxp, FxpArray, QFormat, add, from_real, mul_full, resize, resize_checked
from .instrument import OpCounts, count_ops

__version__ = "0.1.0"

__all__ = [
    "AccelConfig", "AccumulatorWidthError", "BandwidthError", "Codebook",
    "ComparisonReport", "CostReport", "CycleReport", "EncodedKernels",
    "FileFormatError", "FormatMismatchError", "Fxp", "FxpArray",
    "GateConstants", "InvariantError", "KernelSet", "LayerShape", "OpCounts",
    "PasState", "PasmError", "QFormat", "RangeOverflowError", "ShapeError",
    "Tensor3", "WsMacState", "add", "build_codebook", "compare_configs",
    "config_16_mac", "config_16_pas_4_mac", "config_gates", "conv2d_ref",
    "count_ops", "decode", "dot_ref", "encode", "fit_constants", "from_real",
    "guard_bits", "macs_per_output", "mul_full", "pas_accumulate", "pas_reset",
    "pasm_conv2d", "pasm_dot", "pasm_multiply_phase", "quantization_errors",
    "read_codebook_csv", "resize", "resize_checked", "simulate_dot",
    "simulate_layer", "simulate_layer_checked", "sweep", "unit_gates",
    "write_codebook_csv", "ws_mac_dot",
]
