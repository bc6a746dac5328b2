"""Exact reference products, the test-matrix generator and error metrics."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

_MANT_BITS = 53


@dataclass
class ExactMatrix:
    """Exact matrix ``num * 2**exp`` with Python-int numerators."""

    num: np.ndarray  # object array of int
    exp: int

    @property
    def shape(self):
        return self.num.shape

    def to_fractions(self) -> np.ndarray:
        scale = Fraction(2) ** self.exp
        return np.vectorize(lambda v: Fraction(v) * scale, otypes=[object])(self.num)

    def to_float(self) -> np.ndarray:
        """Correctly rounded FP64 values."""
        if self.exp >= 0:
            f = lambda v: float(v << self.exp)  # noqa: E731
        else:
            f = lambda v: v / (1 << -self.exp)  # noqa: E731
        return np.vectorize(f, otypes=[np.float64])(self.num)


@dataclass
class ErrorReport:
    max_rel_err: float
    median_rel_err: float
    exact_match: bool
    n_elements: int


def _decompose(M):
    """Integer significands and exponents with ``M == sig * 2**exp`` elementwise."""
    M = np.asarray(M, dtype=np.float64)
    frac, e = np.frexp(M)
    sig = np.ldexp(frac, _MANT_BITS).astype(np.int64)
    return sig, e.astype(np.int64) - _MANT_BITS


def _digits(M, digit_bits):
    """Split ``M`` into signed fixed-point digit matrices.

    Returns ``(digits, base_exp)`` with ``M == sum_t digits[t] * 2**(base_exp + t*digit_bits)``,
    every digit an integer of magnitude below ``2**digit_bits`` stored as float64.
    """
    sig, e = _decompose(M)
    nz = sig != 0
    if not np.any(nz):
        return [np.zeros(M.shape)], 0
    base = int(e[nz].min())
    shift = np.where(nz, e - base, 0)
    width = int(shift.max()) + _MANT_BITS
    n_digits = -(-width // digit_bits)
    mag = np.abs(sig)
    sign = np.sign(sig)
    mask = (1 << digit_bits) - 1
    digits = []
    for t in range(n_digits):
        s = shift - t * digit_bits  # bit position of the significand's LSB inside digit t
        left = np.clip(s, 0, 63)
        right = np.clip(-s, 0, 63)
        keep = np.clip(digit_bits - left, 0, 63)
        low = mag & ((np.int64(1) << keep) - 1)
        d = np.where(s >= 0, np.where(s < digit_bits, low << left, 0), (mag >> right) & mask)
        d = np.where(right >= 63, 0, d)
        digits.append((sign * d).astype(np.float64))
    return digits, base


def exact_gemm(A, B) -> ExactMatrix:
    """Exact product of two floating-point matrices.

    Each operand is written in fixed point relative to its smallest exponent
    and cut into digits narrow enough that every digit product (an FP64 BLAS
    call) is an exact integer.  The digit products are combined with Python
    integers.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    m, k = A.shape
    n = B.shape[1]
    if k == 0:
        return ExactMatrix(np.zeros((m, n), dtype=np.int64).astype(object), 0)
    digit_bits = (53 - 1 - int(np.ceil(np.log2(max(k, 1))))) // 2
    Ad, ea = _digits(A, digit_bits)
    Bd, eb = _digits(B, digit_bits)
    num = np.zeros((m, n), dtype=np.int64).astype(object)
    for t, a in enumerate(Ad):
        if not a.any():
            continue
        for u, b in enumerate(Bd):
            if not b.any():
                continue
            part = (a @ b).astype(np.int64).astype(object)
            num = num + part * (1 << ((t + u) * digit_bits))
    return ExactMatrix(num, ea + eb)


def compare(C, ref: ExactMatrix) -> ErrorReport:
    """Componentwise relative error ``|c - r| / |r|`` of ``C`` against an exact reference.

    Where ``r == 0`` the error is 0 if ``c == 0`` and infinite otherwise.
    """
    C = np.asarray(getattr(C, "C", C), dtype=np.float64)
    if C.shape != ref.shape:
        raise ValueError(f"shape mismatch: {C.shape} vs {ref.shape}")
    n = C.size
    if n == 0:
        return ErrorReport(0.0, 0.0, True, 0)
    sig, e = _decompose(C)
    lowest = int(e[sig != 0].min()) if np.any(sig != 0) else ref.exp
    common = min(lowest, ref.exp)
    c_num = np.vectorize(lambda s, d: s << d, otypes=[object])(
        sig.astype(object), (e - common).astype(object)
    )
    r_num = ref.num * (1 << (ref.exp - common))

    def rel(c, r):
        if r == 0:
            return 0.0 if c == 0 else np.inf
        return abs(c - r) / abs(r)

    errs = np.vectorize(rel, otypes=[np.float64])(c_num, r_num)
    mx = float(errs.max())
    return ErrorReport(
        max_rel_err=mx,
        median_rel_err=float(np.median(errs)),
        exact_match=bool(mx == 0.0),
        n_elements=n,
    )


def _uniform_open_closed(bitgen, size):
    raw = bitgen.random_raw(size)
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def gen_matrix(m: int, k: int, phi: float, seed: int, precision: str = "fp64") -> np.ndarray:
    """Random ``m x k`` matrix with entries ``(rand - 0.5) * exp(phi * randn)``.

    ``rand`` is uniform on (0, 1] and ``randn`` standard normal, drawn from a
    PCG64 stream: 53-bit uniforms from the top bits of each raw 64-bit word,
    normals by the Box--Muller transform.  Larger ``phi`` spreads exponents.
    """
    if phi < 0:
        raise ValueError(f"phi must be nonnegative, got {phi}")
    size = m * k
    bitgen = np.random.PCG64(seed)
    rand = _uniform_open_closed(bitgen, size)
    u1 = _uniform_open_closed(bitgen, size)
    u2 = _uniform_open_closed(bitgen, size)
    randn = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    vals = (rand - 0.5) * np.exp(phi * randn)
    dtype = np.float64 if precision == "fp64" else np.float32
    return vals.reshape(m, k).astype(dtype)
