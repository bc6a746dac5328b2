"""Vectorized floating-point primitives with exact or single-rounding semantics.

NumPy exposes no fused multiply-add, so ``fma64`` and ``fma32`` are built
from error-free transformations (Knuth's TwoSum, Dekker's TwoProduct) and
rounding to odd.  Both return the correctly rounded (round-half-even) value
of ``a*b + c`` for finite inputs whose intermediate results neither overflow
nor underflow.
"""

from __future__ import annotations

import numpy as np

_SPLITTER = float(2**27 + 1)


def two_sum(a, b):
    """Return ``(s, e)`` with ``s = fl(a + b)`` and ``s + e == a + b`` exactly."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    """Return ``(p, e)`` with ``p = fl(a * b)`` and ``p + e == a * b`` exactly (FP64)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def add_round_to_odd(a, b):
    """``a + b`` in FP64 with rounding to odd.

    Inexact sums are rounded to whichever neighbouring float has an odd last
    significand bit.  Rounding to odd followed by a round-to-nearest into a
    format at least two bits narrower is equivalent to a single rounding.
    """
    s, e = two_sum(a, b)
    bits = np.asarray(s, dtype=np.float64).view(np.int64)
    fix = (e != 0) & ((bits & 1) == 0)
    if np.any(fix):
        toward = np.where(e > 0, np.inf, -np.inf)
        s = np.where(fix, np.nextafter(s, toward), s)
    return s


def fma64(a, b, c):
    """Correctly rounded FP64 ``a*b + c`` (Boldo--Melquiond emulation)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    uh, ul = two_prod(a, b)
    th, tl = two_sum(c, uh)
    v = add_round_to_odd(tl, ul)
    return th + v


def fma32(a, b, c):
    """Correctly rounded FP32 ``a*b + c``.

    The product of two FP32 values is exact in FP64; the sum is rounded to
    odd in FP64 and then to nearest in FP32, which avoids double rounding.
    """
    a = np.asarray(a, dtype=np.float32).astype(np.float64)
    b = np.asarray(b, dtype=np.float32).astype(np.float64)
    c = np.asarray(c, dtype=np.float32).astype(np.float64)
    return add_round_to_odd(a * b, c).astype(np.float32)


def floor_log2(x):
    """Exact ``floor(log2(|x|))`` for nonzero finite ``x``; 0 maps to a large negative int."""
    _, e = np.frexp(np.abs(np.asarray(x)))
    return np.where(np.asarray(x) == 0, np.iinfo(np.int32).min // 2, e.astype(np.int64) - 1)
