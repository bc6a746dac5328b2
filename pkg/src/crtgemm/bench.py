"""Accuracy sweeps, the integer exactness suite and plots of sweep results."""

from __future__ import annotations

import csv
import io
import math
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .crt_tables import MAX_MODULI, MIN_MODULI, build_constants
from .emulator import EmuConfig, emulate_with_constants, gemm_emulated
from .errors import ConfigurationError
from .int8_engine import MAX_K
from .oracle import compare, exact_gemm, gen_matrix
from .scaling import scale_accurate, scale_fast

COLUMNS = (
    "m",
    "n",
    "k",
    "phi",
    "N",
    "mode",
    "precision",
    "seed",
    "max_rel_err",
    "median_rel_err",
    "wall_time",
    "gflops",
)

# mode label of the rows holding plain FP64/FP32 matmul (N is written as 0)
NATIVE = "native"
MODES = ("fast", "accurate")
PRECISIONS = ("fp64", "fp32")


class SweepIOError(OSError):
    """Raised when the sweep CSV or a plot file cannot be read or written."""


class CsvParseError(ValueError):
    """Malformed sweep CSV; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class SweepSpec:
    sizes: list[tuple[int, int, int]]
    phis: list[float]
    moduli_counts: list[int]
    modes: list[str] = field(default_factory=lambda: ["fast", "accurate"])
    precisions: list[str] = field(default_factory=lambda: ["fp64"])
    seeds: list[int] = field(default_factory=lambda: [0])
    output_path: str | None = None
    block_k: int = MAX_K
    workers: int = 1
    timing: bool = True

    def __post_init__(self):
        self.sizes = [tuple(int(d) for d in s) for s in self.sizes]
        for s in self.sizes:
            if len(s) != 3 or min(s) < 1:
                raise ConfigurationError(f"sizes must be positive (m, n, k) triples, got {s}")
        for phi in self.phis:
            if not phi >= 0:
                raise ConfigurationError(f"phi must be nonnegative, got {phi}")
        for mode in self.modes:
            if mode not in MODES:
                raise ConfigurationError(f"unknown mode {mode!r}")
        for prec in self.precisions:
            if prec not in PRECISIONS:
                raise ConfigurationError(f"unknown precision {prec!r}")
            for n_mod in self.moduli_counts:
                if not MIN_MODULI <= n_mod <= MAX_MODULI[prec]:
                    raise ConfigurationError(
                        f"N={n_mod} outside [{MIN_MODULI}, {MAX_MODULI[prec]}] for {prec}"
                    )
        if not 1 <= self.block_k <= MAX_K:
            raise ConfigurationError(f"block_k must be in [1, {MAX_K}], got {self.block_k}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be at least 1, got {self.workers}")


def sweep_operands(m, n, k, phi, seed, precision):
    """The operand pair of one grid point: ``A`` from stream ``2*seed``, ``B`` from ``2*seed + 1``."""
    A = gen_matrix(m, k, phi, 2 * seed, precision)
    B = gen_matrix(k, n, phi, 2 * seed + 1, precision)
    return A, B


def _fmt(x: float) -> str:
    return repr(float(x))


def _row(m, n, k, phi, n_mod, mode, prec, seed, report, elapsed, timing):
    if timing and elapsed > 0:
        wall, gflops = _fmt(elapsed), _fmt(2.0 * m * n * k / elapsed / 1e9)
    else:
        wall = gflops = "nan"
    return [
        str(m), str(n), str(k), _fmt(phi), str(n_mod), mode, prec, str(seed),
        _fmt(report.max_rel_err), _fmt(report.median_rel_err), wall, gflops,
    ]  # fmt: skip


def _grid_groups(spec: SweepSpec):
    """Operand groups in output order; each group shares one oracle product."""
    return [
        (size, prec, phi, seed)
        for size in spec.sizes
        for prec in spec.precisions
        for phi in spec.phis
        for seed in spec.seeds
    ]


def _run_group(spec: SweepSpec, group):
    (m, n, k), prec, phi, seed = group
    A, B = sweep_operands(m, n, k, phi, seed, prec)
    ref = exact_gemm(A, B)
    rows = []

    t0 = time.perf_counter()
    native = A @ B
    elapsed = time.perf_counter() - t0
    rows.append(_row(m, n, k, phi, 0, NATIVE, prec, seed, compare(native, ref), elapsed, spec.timing))

    for mode in spec.modes:
        for n_mod in spec.moduli_counts:
            cfg = EmuConfig(n_moduli=n_mod, mode=mode, precision=prec, block_k=spec.block_k)
            t0 = time.perf_counter()
            res = gemm_emulated(A, B, cfg)
            elapsed = time.perf_counter() - t0
            rows.append(_row(m, n, k, phi, n_mod, mode, prec, seed, compare(res.C, ref), elapsed, spec.timing))
    return rows


def sweep_rows(spec: SweepSpec) -> list[list[str]]:
    """All sweep rows as strings, in deterministic grid order.

    Order: size, precision, phi, seed; within each, the native row first,
    then every (mode, N) pair in the order given by the spec.
    """
    groups = _grid_groups(spec)
    if spec.workers == 1:
        chunks = [_run_group(spec, g) for g in groups]
    else:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(lambda g: _run_group(spec, g), groups))
    return [row for chunk in chunks for row in chunk]


def format_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def run_accuracy_sweep(spec: SweepSpec) -> list[dict]:
    """Run the sweep, write the CSV to ``spec.output_path`` (if set) and return the rows.

    Every grid point is compared against the exact product.  Rows with
    ``mode == "native"`` (and ``N == 0``) hold plain FP64 or FP32 matmul.
    """
    rows = sweep_rows(spec)
    text = format_csv(rows)
    if spec.output_path is not None:
        path = Path(spec.output_path)
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise SweepIOError(f"cannot write sweep CSV to {path}: {exc.strerror or exc}") from exc
    return read_sweep_text(text)


_INT_COLS = {"m", "n", "k", "N", "seed"}
_FLOAT_COLS = {"phi", "max_rel_err", "median_rel_err", "wall_time", "gflops"}


def read_sweep_text(text: str) -> list[dict]:
    """Parse sweep CSV text; raises :class:`CsvParseError` with the offending line number."""
    lines = text.splitlines()
    if not lines:
        raise CsvParseError(1, "empty file, expected a header")
    header = next(csv.reader([lines[0]]))
    if tuple(header) != COLUMNS:
        raise CsvParseError(1, f"unexpected header {header}")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = next(csv.reader([line]))
        if len(fields) != len(COLUMNS):
            raise CsvParseError(lineno, f"expected {len(COLUMNS)} fields, got {len(fields)}")
        row = {}
        for name, value in zip(COLUMNS, fields):
            try:
                if name in _INT_COLS:
                    row[name] = int(value)
                elif name in _FLOAT_COLS:
                    row[name] = float(value)
                else:
                    row[name] = value
            except ValueError:
                raise CsvParseError(lineno, f"bad value {value!r} in column {name}") from None
        out.append(row)
    return out


def read_sweep_csv(path) -> list[dict]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SweepIOError(f"cannot read sweep CSV {path}: {exc.strerror or exc}") from exc
    return read_sweep_text(text)


# ---------------------------------------------------------------- exactness


@dataclass
class ExactnessFailure:
    """Minimal reproducer: rerun ``exactness_trial(seed, trial)``."""

    trial: int
    seed: int
    n_moduli: int
    mode: str
    dims: tuple[int, int, int]
    entry_bits: int
    index: tuple[int, int]  # first mismatching output element
    got: float
    expected: float


@dataclass
class ExactnessSummary:
    trials: int
    failures: list[ExactnessFailure]

    @property
    def passed(self) -> bool:
        return not self.failures

    def describe(self) -> str:
        if self.passed:
            return f"exactness: {self.trials} trials, all exact"
        f = self.failures[0]
        return (
            f"exactness: {len(self.failures)} of {self.trials} trials inexact; first at "
            f"trial={f.trial} seed={f.seed} N={f.n_moduli} mode={f.mode} dims={f.dims} "
            f"bits={f.entry_bits} element={f.index} got={f.got!r} expected={f.expected!r}"
        )


def _scaling_is_lossless(A, B, consts, mode) -> bool:
    scales = scale_fast(A, B, consts) if mode == "fast" else scale_accurate(A, B, consts)
    return bool(np.all(scales.mu_exp >= 0) and np.all(scales.nu_exp >= 0))


def random_exact_operands(rng, m, k, n, consts, mode="fast", bits=None):
    """Random integer matrices on which the emulation must be exact.

    Entries are uniform in ``[-2**b, 2**b]``.  ``b`` starts at ``bits`` (or a
    random value) no larger than ``(52 - ceil(log2 k)) // 2``, so every exact
    product entry is an FP64 integer.  It is lowered until, checked in exact
    integer arithmetic, ``2 * max(|A| @ |B|) < P`` and the scaling step of
    ``mode`` does not truncate.  Returns ``(A, B, b)``.
    """
    log2k = math.ceil(math.log2(max(k, 1)))
    # widest b for which k * 2**(2b) <= 2**52 and 2 * k * 2**(2b) < P always hold
    cap = max(1, min(52 - log2k, consts.big_P.bit_length() - 2 - log2k) // 2)
    b = int(rng.integers(1, cap + 1)) if bits is None else min(int(bits), cap)
    while True:
        A = rng.integers(-(2**b), 2**b + 1, size=(m, k)).astype(np.float64)
        B = rng.integers(-(2**b), 2**b + 1, size=(k, n)).astype(np.float64)
        # k * 2**(2b) <= 2**52, so this int64 product is exact
        bound = 2 * int((np.abs(A).astype(np.int64) @ np.abs(B).astype(np.int64)).max(initial=0))
        if bound < consts.big_P and _scaling_is_lossless(A, B, consts, mode):
            return A, B, b
        if b == 0:
            raise RuntimeError("no lossless integer operands found")  # unreachable for N >= 2
        b -= 1


def exactness_trial(seed: int, trial: int, consts_factory=build_constants, n_moduli=None, max_dim: int = 128):
    """One trial of the exactness suite; returns ``None`` or an :class:`ExactnessFailure`."""
    rng = np.random.default_rng([seed, trial])
    n_mod = int(rng.integers(MIN_MODULI, MAX_MODULI["fp64"] + 1)) if n_moduli is None else n_moduli
    mode = MODES[int(rng.integers(0, 2))]
    m, k, n = (int(d) for d in rng.integers(1, max_dim + 1, size=3))
    consts = consts_factory(n_mod, "fp64")
    # operands are sized with the true tables, so faulty tables cannot shrink them
    A, B, bits = random_exact_operands(rng, m, k, n, build_constants(n_mod, "fp64"), mode)
    cfg = EmuConfig(n_moduli=n_mod, mode=mode)
    C = emulate_with_constants(A, B, consts, cfg).C
    expected = A.astype(np.int64) @ B.astype(np.int64)  # exact: |entries| <= 2**52
    bad = np.argwhere(C != expected)
    if bad.size == 0:
        return None
    i, j = (int(v) for v in bad[0])
    return ExactnessFailure(
        trial=trial, seed=seed, n_moduli=n_mod, mode=mode, dims=(m, k, n), entry_bits=bits,
        index=(i, j), got=float(C[i, j]), expected=float(expected[i, j]),
    )  # fmt: skip


def run_exactness_suite(trials: int, seed: int = 0, consts_factory=build_constants, n_moduli=None) -> ExactnessSummary:
    """Random in-range integer products through the full pipeline, checked for exact equality.

    ``N`` (unless fixed by ``n_moduli``), the scaling mode and the dimensions
    (each at most 128) are drawn per trial.  ``consts_factory(N, precision)``
    supplies the constant tables, which lets a test inject a corrupted table.
    """
    failures = []
    for t in range(trials):
        fail = exactness_trial(seed, t, consts_factory, n_moduli)
        if fail is not None:
            failures.append(fail)
    return ExactnessSummary(trials, failures)


# ---------------------------------------------------------------- plots

PLOT_KINDS = ("error_vs_N", "error_vs_phi")


def _median_curves(rows, kind):
    """``{label: sorted [(x, median max_rel_err)]}``, medians taken over seeds."""
    groups = defaultdict(list)
    for r in rows:
        if r["mode"] == NATIVE:
            continue
        size = f"{r['m']}x{r['n']}x{r['k']}"
        if kind == "error_vs_N":
            label, x = f"{r['mode']} {r['precision']} phi={r['phi']:g} {size}", r["N"]
        else:
            label, x = f"{r['mode']} {r['precision']} N={r['N']} {size}", r["phi"]
        groups[(label, x)].append(r["max_rel_err"])
    curves = defaultdict(list)
    for (label, x), errs in sorted(groups.items()):
        curves[label].append((x, float(np.median(errs))))
    return dict(curves)


def emit_plot(csv_path, kind: str = "error_vs_N", out_path=None) -> Path:
    """Draw median max relative error curves from a sweep CSV as an SVG file.

    ``error_vs_N`` has one curve per (mode, precision, phi, size) and
    ``error_vs_phi`` one per (mode, precision, N, size).  Native matmul
    medians are drawn as horizontal reference lines in ``error_vs_N``.
    Returns the path of the written file (default: ``csv_path`` with suffix
    ``.<kind>.svg``).
    """
    if kind not in PLOT_KINDS:
        raise ConfigurationError(f"plot kind must be one of {PLOT_KINDS}, got {kind!r}")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    csv_path = Path(csv_path)
    rows = read_sweep_csv(csv_path)
    out = Path(out_path) if out_path is not None else csv_path.with_suffix(f".{kind}.svg")

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, pts in _median_curves(rows, kind).items():
        xs, ys = zip(*pts)
        ax.plot(xs, ys, marker="o", label=label)
    if kind == "error_vs_N":
        native = defaultdict(list)
        for r in rows:
            if r["mode"] == NATIVE:
                native[f"native {r['precision']} phi={r['phi']:g}"].append(r["max_rel_err"])
        for label, errs in sorted(native.items()):
            ax.axhline(float(np.median(errs)), linestyle="--", linewidth=0.8, color="gray")
            ax.annotate(label, xy=(0.01, float(np.median(errs))), xycoords=("axes fraction", "data"), fontsize=7)
    ax.set_yscale("log")
    ax.set_xlabel("number of moduli N" if kind == "error_vs_N" else "phi")
    ax.set_ylabel("median max relative error")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=7)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    try:
        fig.savefig(out, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise SweepIOError(f"cannot write plot {out}: {exc.strerror or exc}") from exc
    finally:
        plt.close(fig)
    return out
