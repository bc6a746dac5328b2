"""Command-line entry point: ``crtgemm {sweep,exactness,plot,tables}``.

Exit codes: 0 success, 2 bad configuration or arguments, 3 file read/write
or CSV parse failure, 4 the exactness suite found an inexact result.
"""

from __future__ import annotations

import argparse
import sys

from .bench import (
    PLOT_KINDS,
    CsvParseError,
    SweepIOError,
    SweepSpec,
    emit_plot,
    format_csv,
    run_exactness_suite,
    sweep_rows,
)
from .crt_tables import build_constants, dump_tables_csv
from .errors import ConfigurationError
from .int8_engine import MAX_K

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SUITE_FAILED = 4


class _UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    """Nonnegative integers: ``"8,10,12"`` or inclusive ranges ``"8-16"`` / ``"8-16:2"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                span, _, step = part.partition(":")
                lo, hi = span.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1, int(step) if step else 1))
            else:
                out.append(int(part))
        except ValueError:
            raise _UsageError(f"cannot parse integer list item {part!r}") from None
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise _UsageError(f"cannot parse number list {text!r}") from None


def _sizes(text: str) -> list[tuple[int, int, int]]:
    """``"64,128"`` (cubes) or ``"64x32x16"`` (m x n x k), comma separated."""
    out = []
    for part in text.split(","):
        part = part.strip().lower()
        if not part:
            continue
        try:
            dims = [int(d) for d in part.split("x")]
        except ValueError:
            raise _UsageError(f"cannot parse size {part!r}") from None
        if len(dims) == 1:
            dims *= 3
        if len(dims) != 3:
            raise _UsageError(f"size {part!r} must be a single integer or m x n x k")
        out.append(tuple(dims))
    return out


def _str_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crtgemm",
        description="FP64/FP32 matrix multiplication emulated with INT8 products: accuracy harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="accuracy sweep against the exact product, written as CSV")
    sw.add_argument("--sizes", default="64,128,256,512", help="cube sizes n or m x n x k triples, comma separated")
    sw.add_argument("--phi", default="0.5", help="exponent-spread values, comma separated")
    sw.add_argument("--moduli", default="8-16:2", help="numbers of moduli, e.g. 8,10 or 8-16:2")
    sw.add_argument("--mode", default="fast,accurate", help="scaling modes: fast, accurate")
    sw.add_argument("--precision", default="fp64", help="fp64, fp32 or both")
    sw.add_argument("--seeds", default="0-9", help="seeds, e.g. 0-9 or 1,5,7")
    sw.add_argument("--out", default="sweep.csv", help="output CSV path ('-' for stdout)")
    sw.add_argument("--plot", choices=PLOT_KINDS, action="append", help="also draw this plot next to the CSV")
    sw.add_argument("--block-k", type=int, default=MAX_K, help="inner-dimension block size of the int8 products")
    sw.add_argument("--workers", type=int, default=1, help="grid points computed in parallel")
    sw.add_argument("--no-timing", action="store_true", help="write nan for wall_time/gflops (byte-stable output)")

    ex = sub.add_parser("exactness", help="integer exactness property suite")
    ex.add_argument("--trials", type=int, default=1000)
    ex.add_argument("--seeds", default="0", help="base seed (first value is used)")
    ex.add_argument("--moduli", default=None, help="fix N instead of drawing it per trial")

    pl = sub.add_parser("plot", help="draw an SVG plot from an existing sweep CSV")
    pl.add_argument("--out", required=True, help="sweep CSV to read")
    pl.add_argument("--plot", choices=PLOT_KINDS, default="error_vs_N")

    tb = sub.add_parser("tables", help="dump the constant tables as CSV")
    tb.add_argument("--moduli", default="20")
    tb.add_argument("--precision", default="fp64")
    tb.add_argument("--out", default="-")
    return parser


def _cmd_sweep(args) -> int:
    spec = SweepSpec(
        sizes=_sizes(args.sizes),
        phis=_float_list(args.phi),
        moduli_counts=_int_list(args.moduli),
        modes=_str_list(args.mode),
        precisions=_str_list(args.precision),
        seeds=_int_list(args.seeds),
        output_path=None,
        block_k=args.block_k,
        workers=args.workers,
        timing=not args.no_timing,
    )
    text = format_csv(sweep_rows(spec))
    if args.out == "-":
        sys.stdout.write(text)
        if args.plot:
            raise _UsageError("--plot needs a CSV file given by --out")
        return EXIT_OK
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise SweepIOError(f"cannot write sweep CSV to {args.out}: {exc.strerror or exc}") from exc
    for kind in args.plot or []:
        print(emit_plot(args.out, kind))
    return EXIT_OK


def _cmd_exactness(args) -> int:
    if args.trials < 0:
        raise _UsageError("--trials must be nonnegative")
    seeds = _int_list(args.seeds)
    n_fixed = None
    if args.moduli is not None:
        fixed = _int_list(args.moduli)
        if len(fixed) != 1 or not 2 <= fixed[0] <= 20:
            raise _UsageError("--moduli for exactness takes a single N in [2, 20]")
        n_fixed = fixed[0]
    summary = run_exactness_suite(args.trials, seeds[0] if seeds else 0, n_moduli=n_fixed)
    print(summary.describe())
    return EXIT_OK if summary.passed else EXIT_SUITE_FAILED


def _cmd_plot(args) -> int:
    print(emit_plot(args.out, args.plot))
    return EXIT_OK


def _cmd_tables(args) -> int:
    ns = _int_list(args.moduli)
    if len(ns) != 1:
        raise _UsageError("--moduli for tables takes a single N")
    text = dump_tables_csv(build_constants(ns[0], args.precision))
    if args.out == "-":
        sys.stdout.write(text)
    else:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise SweepIOError(f"cannot write tables to {args.out}: {exc.strerror or exc}") from exc
    return EXIT_OK


_COMMANDS = {"sweep": _cmd_sweep, "exactness": _cmd_exactness, "plot": _cmd_plot, "tables": _cmd_tables}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse exits with status 2 on bad usage
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, _UsageError) as exc:
        print(f"crtgemm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SweepIOError, CsvParseError) as exc:
        print(f"crtgemm: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
