"""Acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, exact_residue, symmetric

from crtgemm import gemm_emulated
from crtgemm.bench import NATIVE, SweepSpec, exactness_trial, format_csv, run_accuracy_sweep, sweep_rows
from crtgemm.crt_tables import MAX_MODULI, build_constants
from crtgemm.emulator import EmuConfig
from crtgemm.int8_engine import MAX_K, int8_gemm
from crtgemm.oracle import compare, exact_gemm
from crtgemm.reconstruct import accumulate, mod_u8
from crtgemm.residue import REFINE_THRESHOLDS, _RMOD_LOG2_LIMIT, rmod_fast, to_residue_slices, truncate_scale_exp
from crtgemm.scaling import scale_fast

SEEDS = list(range(10))


def record(criterion, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    return ok


def medians(rows, **key):
    """Median over seeds of max_rel_err for rows matching ``key``."""
    vals = [r["max_rel_err"] for r in rows if all(r[k] == v for k, v in key.items())]
    assert len(vals) == len(SEEDS), key
    return float(np.median(vals))


# ---------------------------------------------------------------- 1


@pytest.mark.parametrize("n", [2, 5, 10, 15, 20])
def test_c01_crt_exactness(n):
    trials = 1000
    failures = [f for f in (exactness_trial(1000 + n, t, n_moduli=n) for t in range(trials)) if f]
    detail = f"N={n}: {trials - len(failures)}/{trials} products bit-exact"
    if failures:
        f = failures[0]
        ulps = abs(f.got - f.expected) / np.spacing(min(abs(f.got), abs(f.expected)))
        detail += f"; first miss trial={f.trial} element={f.index} got={f.got!r} expected={f.expected!r} ({ulps:g} ulp)"
    assert record("1 CRT exactness", not failures, detail)


# ---------------------------------------------------------------- 2


def _valid_inputs(rng, log2_limit, count, dtype):
    """Integer-valued inputs with |x| < 2**log2_limit: log-uniform, near-limit and edge values."""
    lim = 2.0**log2_limit
    top = float(np.nextafter(dtype(lim), dtype(0)))
    edges = np.array([0, 1, -1, 127, 128, -128, 255, 256, 65280, top, -top, top / 2, -top / 2], dtype=np.float64)
    n_log = count * 3 // 4
    logu = np.trunc(np.exp2(rng.uniform(0, log2_limit, n_log))) * rng.choice([-1.0, 1.0], n_log)
    near = np.trunc(rng.uniform(-1, 1, count - n_log - edges.size) * top)
    x = np.concatenate([edges, logu, near]).astype(dtype)
    x = np.where(np.abs(x.astype(np.float64)) < lim, x, dtype(0))
    return np.trunc(x)


@pytest.mark.parametrize("precision", ["fp64", "fp32"])
def test_c02_fast_rmod_equivalence(precision):
    rng = np.random.default_rng(2)
    dtype = np.float64 if precision == "fp64" else np.float32
    n1, n2 = REFINE_THRESHOLDS[precision]
    count, checked, failures = 10**6, 0, 0
    moduli = build_constants(MAX_MODULI[precision], precision).moduli
    for steps, lo, hi in [(0, 2, n1 - 1), (1, n1, n2 - 1), (2, n2, MAX_MODULI[precision])]:
        x = _valid_inputs(rng, _RMOD_LOG2_LIMIT[precision][steps], count, dtype)
        want = [symmetric(exact_residue(x, p), p) for p in moduli]
        for n in range(lo, hi + 1):
            c = build_constants(n, precision)
            for i, p in enumerate(c.moduli):
                r = rmod_fast(x, i, c).astype(np.int64)
                ok = (r == want[i]) | ((p == 256) & (np.abs(r) == 128) & (np.abs(want[i]) == 128))
                failures += int((~ok).sum())
                checked += x.size
    detail = f"{precision}: {checked} (N, i, x) checks, {failures} failures"
    assert record("2 fast-rmod equivalence", failures == 0, detail)


# ---------------------------------------------------------------- 3


def test_c03_mulhi_mod_equivalence():
    rng = np.random.default_rng(3)
    c = build_constants(20)
    specials = [0, 2**31 - 1, -(2**31), *range(2**31 - 300, 2**31), *range(-(2**31), -(2**31) + 300)]
    for p in c.moduli:
        specials += [p, -p, p + 1, p - 1, -p + 1, -p - 1]
    small = np.arange(-(2**16), 2**16)
    failures, checked = 0, 0
    for chunk in range(5):
        sampled = rng.integers(-(2**31), 2**31, size=2 * 10**6)
        x = sampled if chunk else np.concatenate([np.array(specials), small, sampled])
        for i, p in enumerate(c.moduli):
            failures += int(np.count_nonzero(mod_u8(x, i, c).astype(np.int64) != x % p))
            checked += x.size
    detail = f"{checked} (x, p) checks over all 20 moduli, {failures} failures"
    assert record("3 mulhi-mod equivalence", failures == 0, detail)


# ---------------------------------------------------------------- 4


def test_c04_accumulation_exactness():
    from fractions import Fraction

    rng = np.random.default_rng(4)
    c = build_constants(20)
    trials = 10**5
    s1_int = [int(Fraction(float(v))) for v in c.s1]
    failures = 0
    for U in (
        [np.full(trials, p - 1, dtype=np.uint8) for p in c.moduli],
        [rng.integers(0, p, size=trials).astype(np.uint8) for p in c.moduli],
    ):
        C1, _ = accumulate([u.reshape(1, -1) for u in U], c)
        exact = sum(s * u.astype(object) for s, u in zip(s1_int, U))
        got = [int(Fraction(v)) if float(v).is_integer() else None for v in C1.ravel()]
        failures += sum(g != e for g, e in zip(got, exact))
    detail = f"N=20: {2 * trials} sums (adversarial + random), {failures} inexact"
    assert record("4 accumulation exactness", failures == 0, detail)


# ---------------------------------------------------------------- 5


def test_c05_wraparound_identity():
    # the engine on the saturated operands
    A8 = np.full((1, MAX_K), -128, np.int8)
    B8 = np.full((MAX_K, 1), -128, np.int8)
    raw = int8_gemm(A8, B8).data[0, 0]
    c = build_constants(5)
    engine_ok = raw == -(2**31) and mod_u8(np.array([raw]), 0, c)[0] == 0

    # the full pipeline on inputs whose p_1 = 256 slices are all -128
    A = np.full((1, MAX_K), 5.0)
    B = np.full((MAX_K, 1), 5.0)
    cfg = EmuConfig(n_moduli=5, mode="fast")
    s = scale_fast(A, B, c)
    Ai = truncate_scale_exp(A, s.mu_exp, "row")
    Bi = truncate_scale_exp(B, s.nu_exp, "col")
    slice_a = to_residue_slices(Ai, c).slices[0]
    slice_b = to_residue_slices(Bi, c).slices[0]
    wraps = bool(np.all(slice_a == -128) and np.all(slice_b == -128))
    wrapped = int8_gemm(slice_a, slice_b).data[0, 0] == -(2**31)
    C = gemm_emulated(A, B, cfg).C
    exact = compare(C, exact_gemm(A, B)).exact_match
    ok = engine_ok and wraps and wrapped and exact
    detail = (f"engine entry {raw}, mod 256 -> 0: {engine_ok}; pipeline slices all -128: {wraps}, "
              f"C'_1 wrapped: {wrapped}, result {float(C[0, 0])!r} exact: {exact}")
    assert record("5 wraparound identity", ok, detail)


# ---------------------------------------------------------------- 6 to 9 share sweeps


@pytest.fixture(scope="module")
def fp64_sweep():
    spec = SweepSpec(sizes=[(256,) * 3, (512,) * 3], phis=[0.5], moduli_counts=[8, 10, 12, 14, 15, 16],
                     modes=["fast", "accurate"], precisions=["fp64"], seeds=SEEDS, timing=False)
    return run_accuracy_sweep(spec)


@pytest.fixture(scope="module")
def wide_sweep():
    spec = SweepSpec(sizes=[(256,) * 3], phis=[4.0], moduli_counts=[15, 17], modes=["fast", "accurate"],
                     precisions=["fp64"], seeds=SEEDS, timing=False)
    return run_accuracy_sweep(spec)


@pytest.fixture(scope="module")
def fp32_sweep():
    spec = SweepSpec(sizes=[(256,) * 3, (512,) * 3], phis=[0.5, 1.0], moduli_counts=[8], modes=["fast"],
                     precisions=["fp32"], seeds=SEEDS, timing=False)
    return run_accuracy_sweep(spec)


@pytest.mark.parametrize("size", [256, 512])
def test_c06_dgemm_level_accuracy(fp64_sweep, size):
    native = medians(fp64_sweep, m=size, mode=NATIVE)
    n15 = medians(fp64_sweep, m=size, mode="accurate", N=15)
    n14 = medians(fp64_sweep, m=size, mode="accurate", N=14)
    ok = n15 <= 4 * native and n14 <= 16 * native
    detail = (f"{size}^3: native {native:.3e}; accurate N=15 {n15:.3e} ({n15 / native:.2f}x, limit 4x); "
              f"N=14 {n14:.3e} ({n14 / native:.2f}x, limit 16x)")
    assert record("6 DGEMM-level accuracy", ok, detail)


@pytest.mark.parametrize("size", [256, 512])
@pytest.mark.parametrize("phi", [0.5, 1.0])
def test_c07_sgemm_level_accuracy(fp32_sweep, size, phi):
    native = medians(fp32_sweep, m=size, phi=phi, mode=NATIVE)
    fast8 = medians(fp32_sweep, m=size, phi=phi, mode="fast", N=8)
    detail = f"{size}^3 phi={phi}: native fp32 {native:.3e}; fast N=8 {fast8:.3e} ({fast8 / native:.3f}x, limit 4x)"
    assert record("7 SGEMM-level accuracy", fast8 <= 4 * native, detail)


def test_c08_phi_degradation(fp64_sweep, wide_sweep):
    fast_narrow = medians(fp64_sweep, m=256, mode="fast", N=15)
    fast_wide = medians(wide_sweep, mode="fast", N=15)
    native_wide = medians(wide_sweep, mode=NATIVE)
    accu17 = medians(wide_sweep, mode="accurate", N=17)
    ok = fast_wide >= 10 * fast_narrow and accu17 <= 16 * native_wide
    detail = (f"256^3 fast N=15: phi=4 {fast_wide:.3e} vs phi=0.5 {fast_narrow:.3e} "
              f"({fast_wide / fast_narrow:.0f}x, need >= 10x); accurate N=17 phi=4 {accu17:.3e} vs native "
              f"{native_wide:.3e} ({accu17 / native_wide:.2f}x, limit 16x)")
    assert record("8 phi-degradation", ok, detail)


# medians at or below this are at the FP64 output-rounding floor
FP64_FLOOR = 4 * 2.0**-53


@pytest.mark.parametrize("size", [256, 512])
@pytest.mark.parametrize("mode", ["fast", "accurate"])
def test_c09_monotonicity(fp64_sweep, size, mode):
    ns = [8, 10, 12, 14, 16]
    meds = [medians(fp64_sweep, m=size, mode=mode, N=n) for n in ns]
    ok = all(b <= a or (a <= FP64_FLOOR and b <= FP64_FLOOR) for a, b in zip(meds, meds[1:]))
    detail = f"{size}^3 {mode}: " + ", ".join(f"N={n} {v:.2e}" for n, v in zip(ns, meds))
    assert record("9 monotonicity", ok, detail)


# ---------------------------------------------------------------- 10


def test_c10_determinism():
    base = dict(sizes=[(96, 80, 70), (33, 17, 130)], phis=[0.5, 4.0], moduli_counts=[8, 15],
                modes=["fast", "accurate"], precisions=["fp64", "fp32"], seeds=[0, 1], timing=False)
    runs = [format_csv(sweep_rows(SweepSpec(**base, workers=w))) for w in (1, 1, 4)]
    same = runs[0].encode() == runs[1].encode() == runs[2].encode()
    detail = f"{len(runs[0].splitlines()) - 1} rows; run1 == run2 (workers 1) == run3 (workers 4): {same}"
    assert record("10 determinism", same, detail)
