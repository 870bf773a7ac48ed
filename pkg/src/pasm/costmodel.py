"""Analytical gate-count model with calibratable NAND2-equivalent constants.

Per-unit structure:

====================  =====  ==========  =========  =============
sub-component         adder  multiplier  registers  regfile ports
====================  =====  ==========  =========  =============
simple MAC              1        1           1            0
weight-shared MAC       1        1           b            1
parallel accumulator    1        0           b            2
====================  =====  ==========  =========  =============

Gate costs scale as ``w`` per adder and register bit, ``w**2`` per multiplier,
and ``w*b`` per register-file port.  The default constants are standard-cell
folklore magnitudes (full adder ~6 NAND2, array-multiplier cell ~7, DFF ~5,
mux-tree port ~1.5 per bit-entry); absolute synthesis numbers are not
reproducible here, so only directions and scaling laws are contracted, and
``fit_constants`` recalibrates against user-supplied synthesis totals.
Power is deliberately not modeled: it needs toggle rates this package cannot
produce.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence, Union

from .accelsim import MODE_DIRECT, AccelConfig
from .errors import FileFormatError, InvariantError

UNIT_SIMPLE_MAC = "simple-mac"
UNIT_WS_MAC = "ws-mac"
UNIT_PAS = "pas"
UNITS = (UNIT_SIMPLE_MAC, UNIT_WS_MAC, UNIT_PAS)

# (adders, multipliers, registers in units of b, registers fixed, ports)
_UNIT_STRUCTURE = {
    UNIT_SIMPLE_MAC: (1, 1, 0, 1, 0),
    UNIT_WS_MAC: (1, 1, 1, 0, 1),
    UNIT_PAS: (1, 0, 1, 0, 2),
}

CONSTANT_NAMES = (
    "adder_per_bit",
    "mult_per_bit_sq",
    "register_per_bit",
    "regfile_port_per_bit_entry",
)


@dataclass(frozen=True)
class GateConstants:
    adder_per_bit: Fraction = Fraction(6)
    mult_per_bit_sq: Fraction = Fraction(7)
    register_per_bit: Fraction = Fraction(5)
    regfile_port_per_bit_entry: Fraction = Fraction(3, 2)

    def __post_init__(self) -> None:
        for name in CONSTANT_NAMES:
            if getattr(self, name) <= 0:
                raise InvariantError(f"{name} must be strictly positive")


DEFAULT_CONSTANTS = GateConstants()


@dataclass(frozen=True)
class CostReport:
    unit: str
    w: int
    b: int
    gates_adder: Fraction
    gates_mult: Fraction
    gates_register: Fraction
    gates_regfile_port: Fraction

    @property
    def gates_total(self) -> Fraction:
        return (self.gates_adder + self.gates_mult
                + self.gates_register + self.gates_regfile_port)


def _check_b(b: int) -> None:
    if b < 2 or b & (b - 1):
        raise InvariantError(f"b must be a power of two >= 2, got {b}")


def unit_gates(unit: str, w: int, b: int,
               k: GateConstants = DEFAULT_CONSTANTS) -> CostReport:
    """Gate count of one unit; ``b`` is ignored for the plain MAC."""
    if unit not in _UNIT_STRUCTURE:
        raise InvariantError(f"unknown unit {unit!r}, expected one of {UNITS}")
    if w < 2:
        raise InvariantError(f"bit width must be at least 2, got {w}")
    if unit != UNIT_SIMPLE_MAC:
        _check_b(b)
    adders, mults, regs_b, regs_fixed, ports = _UNIT_STRUCTURE[unit]
    n_regs = regs_b * b + regs_fixed
    return CostReport(
        unit=unit,
        w=w,
        b=b,
        gates_adder=k.adder_per_bit * w * adders,
        gates_mult=k.mult_per_bit_sq * w * w * mults,
        gates_register=k.register_per_bit * w * n_regs,
        gates_regfile_port=k.regfile_port_per_bit_entry * w * b * ports,
    )


def config_label(cfg: AccelConfig) -> str:
    if cfg.mode == MODE_DIRECT:
        return f"{cfg.n_mac_units}-mac"
    return f"{cfg.n_pas_units}-pas-{cfg.n_mac_units}-mac"


def config_gates(cfg: AccelConfig, k: GateConstants = DEFAULT_CONSTANTS) -> CostReport:
    """Whole-organization totals: MACs are weight-shared in both designs."""
    ws = unit_gates(UNIT_WS_MAC, cfg.w, cfg.b, k)
    if cfg.mode == MODE_DIRECT:
        parts = [(cfg.n_mac_units, ws)]
    else:
        pas = unit_gates(UNIT_PAS, cfg.w, cfg.b, k)
        parts = [(cfg.n_pas_units, pas), (cfg.n_mac_units, ws)]
    return CostReport(
        unit=config_label(cfg),
        w=cfg.w,
        b=cfg.b,
        gates_adder=sum(n * r.gates_adder for n, r in parts),
        gates_mult=sum(n * r.gates_mult for n, r in parts),
        gates_register=sum(n * r.gates_register for n, r in parts),
        gates_regfile_port=sum(n * r.gates_regfile_port for n, r in parts),
    )


def macs_per_output(kernel_size: int, channels: int) -> int:
    """Multiply-accumulates per output element: kernel_size**2 * channels."""
    if kernel_size < 1 or channels < 1:
        raise InvariantError("kernel size and channel count must be >= 1")
    return kernel_size ** 2 * channels


def sweep(w_values: Sequence[int], b_values: Sequence[int],
          k: GateConstants = DEFAULT_CONSTANTS) -> list[CostReport]:
    """Unit and organization reports over the cross product of widths and bins."""
    if not w_values or not b_values:
        raise InvariantError("sweep needs at least one width and one bin count")
    from .accelsim import config_16_mac, config_16_pas_4_mac

    reports: list[CostReport] = []
    for w in sorted(w_values):
        for b in sorted(b_values):
            for unit in UNITS:
                reports.append(unit_gates(unit, w, b, k))
            reports.append(config_gates(config_16_mac(b=b, w=w), k))
            reports.append(config_gates(config_16_pas_4_mac(b=b, w=w), k))
    return reports


def fit_constants(samples: Iterable[tuple[str, int, int, float]]) -> GateConstants:
    """Least-squares fit of the four constants to observed unit totals.

    Each sample is ``(unit, w, b, observed_total_gates)``.  At least four
    samples spanning the multiplier and port terms are needed for the system
    to be determined.
    """
    import numpy as np

    rows = []
    totals = []
    for unit, w, b, total in samples:
        if unit not in _UNIT_STRUCTURE:
            raise InvariantError(f"unknown unit {unit!r} in calibration data")
        adders, mults, regs_b, regs_fixed, ports = _UNIT_STRUCTURE[unit]
        rows.append([
            w * adders,
            w * w * mults,
            w * (regs_b * b + regs_fixed),
            w * b * ports,
        ])
        totals.append(total)
    if len(rows) < len(CONSTANT_NAMES):
        raise InvariantError(
            f"need at least {len(CONSTANT_NAMES)} samples, got {len(rows)}"
        )
    solution, *_ = np.linalg.lstsq(np.array(rows, dtype=float),
                                   np.array(totals, dtype=float), rcond=None)
    fitted = [Fraction(x).limit_denominator(10**6) for x in solution]
    return GateConstants(*fitted)


REPORT_COLUMNS = ["unit", "w", "b", "adder", "mult", "register", "regfile_port", "total"]

PathLike = Union[str, Path]


def write_report_csv(path: PathLike, reports: Iterable[CostReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            writer.writerow([r.unit, r.w, r.b, r.gates_adder, r.gates_mult,
                             r.gates_register, r.gates_regfile_port, r.gates_total])


def read_report_csv(path: PathLike) -> list[CostReport]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    if not rows or rows[0] != REPORT_COLUMNS:
        raise FileFormatError(f"{path}: expected header {','.join(REPORT_COLUMNS)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(REPORT_COLUMNS):
            raise FileFormatError(f"{path}:{lineno}: expected {len(REPORT_COLUMNS)} columns")
        try:
            report = CostReport(row[0], int(row[1]), int(row[2]), Fraction(row[3]),
                                Fraction(row[4]), Fraction(row[5]), Fraction(row[6]))
            if report.gates_total != Fraction(row[7]):
                raise FileFormatError(f"{path}:{lineno}: total does not equal sum of parts")
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: {exc}") from exc
        out.append(report)
    return out


def write_constants_csv(path: PathLike, k: GateConstants) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "value"])
        for name in CONSTANT_NAMES:
            writer.writerow([name, getattr(k, name)])


def read_constants_csv(path: PathLike) -> GateConstants:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    if not rows or rows[0] != ["name", "value"]:
        raise FileFormatError(f"{path}: expected header 'name,value'")
    values: dict[str, Fraction] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise FileFormatError(f"{path}:{lineno}: expected 2 columns")
        name = row[0].strip()
        if name not in CONSTANT_NAMES:
            raise FileFormatError(f"{path}:{lineno}: unknown constant {name!r}")
        try:
            values[name] = Fraction(row[1])
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: {exc}") from exc
    missing = [n for n in CONSTANT_NAMES if n not in values]
    if missing:
        raise FileFormatError(f"{path}: missing constants {missing}")
    try:
        return GateConstants(**values)
    except InvariantError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
