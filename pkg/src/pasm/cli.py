"""Command-line front end: quantize, check, simulate, sweep.

Exit codes are a stable contract for CI: 0 success, 1 equivalence-check
mismatch, 2 I/O or file-parse failure, 3 invariant or usage violation.
Every subcommand is deterministic given its full flag set including the seed,
so identical invocations produce byte-identical outputs.
"""
from __future__ import annotations

import argparse
import csv
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import accelsim, codebook, core, costmodel, tensorio
from .convref import KernelSet, Tensor3, conv2d_ref, guard_bits
from .errors import FileFormatError, InvariantError, PasmError
from .fxp import FxpArray, QFormat, from_real
from .rng import Lcg64

SWEEP_COLUMNS = [
    "w", "b",
    "mac_adder", "mac_mult", "mac_register", "mac_regfile_port", "mac_total",
    "pasm_adder", "pasm_mult", "pasm_register", "pasm_regfile_port", "pasm_total",
    "ratio",
]


class _Parser(argparse.ArgumentParser):
    # Usage violations exit 3 per the CLI contract, not argparse's default 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def _qformat(text: str) -> QFormat:
    try:
        return QFormat.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _int_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}: {exc}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"need positive integers, got {text!r}")
    return values


def _build_parser() -> _Parser:
    parser = _Parser(prog="pasm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantize", help="build a shared-weight codebook from a weights file")
    q.add_argument("input", help="weights file: tensor binary or decimal text/CSV")
    q.add_argument("--bins", type=int, default=16, metavar="B")
    q.add_argument("--method", choices=["uniform", "kmeans"], default="uniform")
    q.add_argument("--format", type=_qformat, default=QFormat(16, 8), metavar="Qw.f")
    q.add_argument("--out", metavar="FILE", help="codebook CSV path")
    q.set_defaults(handler=cmd_quantize)

    c = sub.add_parser("check", help="bit-exactness check of the accelerated convolution")
    c.add_argument("--width", type=int, default=8)
    c.add_argument("--height", type=int, default=8)
    c.add_argument("--channels", type=int, default=4)
    c.add_argument("--kernel-size", "-K", type=int, default=3, dest="kernel_size")
    c.add_argument("--out-channels", type=int, default=2, dest="out_channels")
    c.add_argument("--bins", type=int, default=16, metavar="B")
    c.add_argument("--seed", type=int, default=42, metavar="N")
    c.add_argument("--format", type=_qformat, default=QFormat(16, 8), metavar="Qw.f")
    c.set_defaults(handler=cmd_check)

    s = sub.add_parser("simulate", help="cycle-count a dot product or layer on a configuration")
    s.add_argument("--config", choices=["16-mac", "16-pas-4-mac", "custom"],
                   default="16-mac")
    s.add_argument("--dot", type=int, metavar="N",
                   help="simulate a single n-input dot product instead of a layer")
    s.add_argument("--width", type=int, default=8)
    s.add_argument("--height", type=int, default=8)
    s.add_argument("--kernel-size", "-K", type=int, default=3, dest="kernel_size")
    s.add_argument("--channels", type=int, default=4)
    s.add_argument("--out-channels", type=int, default=2, dest="out_channels")
    s.add_argument("--bins", type=int, default=16, metavar="B")
    s.add_argument("--format", type=_qformat, default=QFormat(16, 8), metavar="Qw.f")
    s.add_argument("--overlap", action="store_true",
                   help="double-buffer bins so the post-pass hides behind accumulation")
    s.add_argument("--pas-units", type=int, default=0, help="custom config only")
    s.add_argument("--mac-units", type=int, default=1, help="custom config only")
    s.add_argument("--image-inputs", type=int, default=1, help="custom config only")
    s.add_argument("--weight-inputs", type=int, default=1, help="custom config only")
    s.add_argument("--out", metavar="FILE", help="write the report CSV here")
    s.add_argument("--plot", nargs="?", const="", metavar="FILE",
                   help="render a cycle-breakdown figure next to the CSV")
    s.set_defaults(handler=cmd_simulate)

    w = sub.add_parser("sweep", help="gate-count comparison across widths or bin counts")
    w.add_argument("--axis", choices=["width", "bins"], required=True)
    w.add_argument("--values", type=_int_list, required=True, metavar="V1,V2,...")
    w.add_argument("--bins", type=int, default=16, metavar="B",
                   help="fixed bin count for the width axis")
    w.add_argument("--width-bits", type=int, default=32, metavar="W",
                   help="fixed bit width for the bins axis")
    w.add_argument("--constants", metavar="FILE", help="gate-constant CSV overriding defaults")
    w.add_argument("--out", metavar="FILE", help="write the sweep CSV here")
    w.add_argument("--plot", nargs="?", const="", metavar="FILE",
                   help="render a comparison figure next to the CSV")
    w.set_defaults(handler=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 3
    try:
        return args.handler(args)
    except FileFormatError as exc:
        print(f"pasm: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"pasm: {exc}", file=sys.stderr)
        return 2
    except PasmError as exc:
        print(f"pasm: {exc}", file=sys.stderr)
        return 3


# ---------------------------------------------------------------- quantize


def _read_weight_values(path: Path, fmt: QFormat) -> FxpArray:
    if tensorio.sniff(path):
        dims, kind, values = tensorio.read_tensor(path)
        if kind != tensorio.KIND_FXP_RAW_I64:
            raise FileFormatError(f"{path}: expected a raw fixed-point tensor")
        return FxpArray(fmt, values)
    try:
        text = path.read_text()
    except UnicodeDecodeError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    raws = []
    for row in csv.reader(text.splitlines()):
        for cell in row:
            cell = cell.strip()
            if not cell or cell.lower() == "value":
                continue
            try:
                raws.append(from_real(Fraction(cell), fmt).raw)
            except ValueError as exc:
                raise FileFormatError(f"{path}: bad value {cell!r}: {exc}") from exc
    if not raws:
        raise FileFormatError(f"{path}: no weight values found")
    return FxpArray(fmt, raws, validate=False)


def cmd_quantize(args) -> int:
    method = codebook.METHOD_UNIFORM if args.method == "uniform" else codebook.METHOD_KMEANS
    if args.bins < 2 or args.bins & (args.bins - 1):
        raise InvariantError(f"b must be a power of two, got {args.bins}")
    input_path = Path(args.input)
    weights = _read_weight_values(input_path, args.format)
    cb = codebook.build_codebook(weights, args.bins, method)

    cb_path = Path(args.out) if args.out else input_path.with_suffix(".codebook.csv")
    stem = str(cb_path)[:-4] if str(cb_path).endswith(".csv") else str(cb_path)
    idx_path = Path(stem.removesuffix(".codebook") + ".indices.bin")
    codebook.write_codebook_csv(cb_path, cb)
    kernels = KernelSet(1, 1, len(weights), args.format, tuple(weights.raws))
    enc = codebook.encode(kernels, cb)
    tensorio.write_tensor(idx_path, (len(weights),), tensorio.KIND_INDEX_U8, enc.indices)

    mx, mean = codebook.quantization_errors(weights, cb)
    lo, hi = min(weights.raws), max(weights.raws)
    bound = Fraction(hi - lo, args.format.scale * 2 * args.bins) + args.format.step
    print(f"codebook: {cb_path} (b={args.bins}, format={args.format}, method={method})")
    print(f"indices:  {idx_path} ({len(weights)} values)")
    print(f"quantization error: max={float(mx):.10g} mean={float(mean):.10g} "
          f"bound={float(bound):.10g}")
    return 0


# ------------------------------------------------------------------- check


def _random_layer(fmt: QFormat, width: int, height: int, channels: int,
                  kernel_size: int, out_channels: int, b: int,
                  seed: int) -> tuple[Tensor3, codebook.Codebook, codebook.EncodedKernels]:
    rng = Lcg64(seed)
    in_raws = [rng.raw_headroom(fmt) for _ in range(width * height * channels)]
    inp = Tensor3(width, height, channels, fmt, tuple(in_raws))
    k_count = out_channels * kernel_size ** 2 * channels
    k_raws = [rng.raw_headroom(fmt) for _ in range(k_count)]
    kernels = KernelSet(out_channels, kernel_size, channels, fmt, tuple(k_raws))
    cb = codebook.build_codebook(FxpArray(fmt, k_raws, validate=False), b)
    return inp, cb, codebook.encode(kernels, cb)


def cmd_check(args) -> int:
    fmt = args.format
    k, c = args.kernel_size, args.channels
    if min(args.width, args.height, c, k, args.out_channels) < 1:
        raise InvariantError("layer dims must be positive")
    if k > min(args.width, args.height):
        raise InvariantError(
            f"kernel {k} larger than input {args.width}x{args.height}"
        )
    if args.bins < 2 or args.bins & (args.bins - 1):
        raise InvariantError(f"b must be a power of two, got {args.bins}")
    n = k * k * c
    outputs = (args.width - k + 1) * (args.height - k + 1) * args.out_channels
    if outputs * n > 10**6:
        raise InvariantError(
            f"workload of {outputs * n} ops exceeds the 1e6 oracle budget"
        )
    inp, cb, enc = _random_layer(fmt, args.width, args.height, c, k,
                                 args.out_channels, args.bins, args.seed)
    w, f = fmt.total_bits, fmt.frac_bits
    acc_fmt = QFormat(w + guard_bits(n), f)
    ref_acc = QFormat(2 * w + guard_bits(n), 2 * f)
    out_fmt = QFormat(acc_fmt.total_bits + w + guard_bits(args.bins), 2 * f)
    print(f"layer {args.width}x{args.height}x{c} K={k} out_channels={args.out_channels} "
          f"b={args.bins} seed={args.seed} format={fmt}")
    got = core.pasm_conv2d(inp, enc, cb, acc_fmt, out_fmt)
    want = conv2d_ref(inp, codebook.decode(enc), ref_acc)
    if got.raws == want.raws:
        print(f"BITEXACT ({outputs} outputs, {n} accumulations each)")
        return 0
    flat = next(i for i, (a, bb) in enumerate(zip(got.raws, want.raws)) if a != bb)
    o = flat % got.channels
    y = (flat // got.channels) % got.height
    x = flat // (got.channels * got.height)
    print(f"MISMATCH at (w={x}, h={y}, o={o}): "
          f"accelerated raw {got.raws[flat]}, reference raw {want.raws[flat]}")
    return 1


# ---------------------------------------------------------------- simulate


def _config_from_args(args) -> accelsim.AccelConfig:
    if args.config == "16-mac":
        return accelsim.config_16_mac(b=args.bins, w=args.format.total_bits)
    if args.config == "16-pas-4-mac":
        return accelsim.config_16_pas_4_mac(b=args.bins, w=args.format.total_bits,
                                            overlap=args.overlap)
    mode = accelsim.MODE_PAS_SHARED if args.pas_units > 0 else accelsim.MODE_DIRECT
    return accelsim.AccelConfig(args.pas_units, args.mac_units, args.image_inputs,
                                args.weight_inputs, args.bins, args.format.total_bits,
                                mode, args.overlap)


def _write_rows(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[col] for col in columns])


def _print_rows(columns, rows) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[col] for col in columns])


def _resolve_plot_path(plot_arg: str, out, default_stem: str) -> Path:
    if plot_arg:
        return Path(plot_arg)
    if out:
        return Path(str(out)).with_suffix(".png")
    return Path(f"{default_stem}.png")


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    if args.overlap and config.mode == accelsim.MODE_DIRECT:
        raise InvariantError("--overlap only applies to the pas-shared-mac mode")
    if args.dot is not None:
        if args.dot < 0:
            raise InvariantError(f"--dot must be non-negative, got {args.dot}")
        layer = accelsim.dot_layer(args.dot)
        report = accelsim.simulate_dot(config, args.dot)
        workload = f"dot n={args.dot}"
    else:
        layer = accelsim.LayerShape(args.width, args.height, args.kernel_size,
                                    args.channels, args.out_channels)
        report = accelsim.simulate_layer(config, layer)
        workload = (f"layer {layer.width}x{layer.height} K={layer.kernel_size} "
                    f"c={layer.in_channels} out_ch={layer.out_channels}")
    row = accelsim.report_row(config, layer, report)
    rows = [row]
    if args.out:
        _write_rows(args.out, accelsim.REPORT_COLUMNS, rows)
        print(f"config={args.config} mode={config.mode} w={config.w} b={config.b} "
              f"overlap={int(config.overlap_postpass)}")
        print(f"{workload}: total={report.total_cycles} cycles "
              f"(accumulate={report.accumulate_cycles}, post-pass={report.postpass_cycles}), "
              f"util_pas={report.util_pas}, util_mac={report.util_mac}")
        print(f"report: {args.out}")
    else:
        _print_rows(accelsim.REPORT_COLUMNS, rows)
    if args.plot is not None:
        from . import plots
        plot_path = _resolve_plot_path(args.plot, args.out, "simulate")
        plots.plot_cycle_report(rows, plot_path)
        print(f"figure: {plot_path}")
    return 0


def parse_simulate_csv(path) -> list[dict]:
    """Read a simulate CSV back into typed rows (exact round-trip)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != accelsim.REPORT_COLUMNS:
        raise FileFormatError(f"{path}: expected header {','.join(accelsim.REPORT_COLUMNS)}")
    out = []
    for row in rows[1:]:
        if len(row) != len(accelsim.REPORT_COLUMNS):
            raise FileFormatError(f"{path}: wrong column count")
        rec = dict(zip(accelsim.REPORT_COLUMNS, row))
        for key in ("w", "b", "n_pas", "n_mac", "K", "c", "out_ch", "width", "height",
                    "acc_cycles", "post_cycles", "total_cycles", "overlap"):
            rec[key] = int(rec[key])
        for key in ("util_pas", "util_mac"):
            rec[key] = Fraction(rec[key])
        out.append(rec)
    return out


# ------------------------------------------------------------------- sweep


def cmd_sweep(args) -> int:
    constants = (costmodel.read_constants_csv(args.constants)
                 if args.constants else costmodel.DEFAULT_CONSTANTS)
    rows = []
    for value in sorted(args.values):
        if args.axis == "width":
            w, b = value, args.bins
        else:
            w, b = args.width_bits, value
        mac = costmodel.config_gates(accelsim.config_16_mac(b=b, w=w), constants)
        pasm = costmodel.config_gates(accelsim.config_16_pas_4_mac(b=b, w=w), constants)
        rows.append({
            "w": w, "b": b,
            "mac_adder": mac.gates_adder, "mac_mult": mac.gates_mult,
            "mac_register": mac.gates_register,
            "mac_regfile_port": mac.gates_regfile_port,
            "mac_total": mac.gates_total,
            "pasm_adder": pasm.gates_adder, "pasm_mult": pasm.gates_mult,
            "pasm_register": pasm.gates_register,
            "pasm_regfile_port": pasm.gates_regfile_port,
            "pasm_total": pasm.gates_total,
            "ratio": pasm.gates_total / mac.gates_total,
        })
    if args.out:
        _write_rows(args.out, SWEEP_COLUMNS, rows)
        for row in rows:
            print(f"w={row['w']} b={row['b']}: mac={row['mac_total']} "
                  f"pasm={row['pasm_total']} ratio={float(row['ratio']):.4f}")
        print(f"report: {args.out}")
    else:
        _print_rows(SWEEP_COLUMNS, rows)
    if args.plot is not None:
        from . import plots
        axis_key = "w" if args.axis == "width" else "b"
        plot_path = _resolve_plot_path(args.plot, args.out, "sweep")
        plots.plot_cost_sweep(rows, axis_key, plot_path)
        print(f"figure: {plot_path}")
    return 0


def parse_sweep_csv(path) -> list[dict]:
    """Read a sweep CSV back into typed rows (exact round-trip)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != SWEEP_COLUMNS:
        raise FileFormatError(f"{path}: expected header {','.join(SWEEP_COLUMNS)}")
    out = []
    for row in rows[1:]:
        if len(row) != len(SWEEP_COLUMNS):
            raise FileFormatError(f"{path}: wrong column count")
        rec = dict(zip(SWEEP_COLUMNS, row))
        rec["w"] = int(rec["w"])
        rec["b"] = int(rec["b"])
        for key in SWEEP_COLUMNS[2:]:
            rec[key] = Fraction(rec[key])
        out.append(rec)
    return out


if __name__ == "__main__":
    sys.exit(main())
