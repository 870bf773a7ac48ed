"""Exception types shared across the package.

Most errors subclass ValueError so generic numeric code can catch them the
usual way; the CLI maps them onto its exit-code contract.
"""


class PasmError(Exception):
    """Base class for all package-specific errors."""


class FormatMismatchError(PasmError, ValueError):
    """Operands disagree on Q-format where agreement is required."""


class RangeOverflowError(PasmError, OverflowError):
    """A checked conversion or resize produced a value outside the format."""


class ShapeError(PasmError, ValueError):
    """Length, dimension, or channel-count mismatch between operands."""


class InvariantError(PasmError, ValueError):
    """A structural parameter violates its contract (e.g. b not a power of two)."""


class AccumulatorWidthError(PasmError, ValueError):
    """Accumulator format too narrow for the guard-bit rule."""


class BandwidthError(PasmError, ValueError):
    """Accelerator configuration demands more ops per cycle than units exist."""


class FileFormatError(PasmError, ValueError):
    """A tensor or CSV file failed to parse."""
