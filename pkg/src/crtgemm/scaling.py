"""Power-of-two row/column scale vectors that keep ``2 * sum|a'||b'| < P``.

Fast mode bounds each dot product with the Cauchy--Schwarz inequality.
Accurate mode bounds it with an INT8 product of rounded-up absolute values,
which is tighter and therefore truncates less.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._fp import floor_log2
from .crt_tables import CrtConstants
from .int8_engine import MAX_K, int8_gemm
from .residue import rmod_magnitude_limit

_UNIT_ROUNDOFF = {"fp64": 2.0**-53, "fp32": 2.0**-24}
_WORK_DTYPE = {"fp64": np.float64, "fp32": np.float32}


@dataclass
class ScalePair:
    mu: np.ndarray  # powers of two, one per row of A
    nu: np.ndarray  # powers of two, one per column of B
    mode: str
    mu_exp: np.ndarray
    nu_exp: np.ndarray


def _pair(mu_exp, nu_exp, mode) -> ScalePair:
    mu_exp = np.asarray(mu_exp, dtype=np.int64)
    nu_exp = np.asarray(nu_exp, dtype=np.int64)
    return ScalePair(
        mu=np.ldexp(1.0, mu_exp.astype(np.int32)),
        nu=np.ldexp(1.0, nu_exp.astype(np.int32)),
        mode=mode,
        mu_exp=mu_exp,
        nu_exp=nu_exp,
    )


def _sumsq_upper(M, axis, precision):
    """Upper bound on the sum of squares along ``axis`` of an array with |entries| < 2.

    The round-to-nearest sum is inflated by ``1 + 2(k+2)u``, which covers the
    accumulated rounding error without switching the FPU rounding mode.
    """
    dtype = _WORK_DTYPE[precision]
    M = M.astype(dtype, copy=False)
    k = M.shape[axis]
    s = np.zeros(M.shape[1 - axis], dtype=dtype)
    # fixed sequential order along the reduction axis
    for h in range(k):
        v = M[h, :] if axis == 0 else M[:, h]
        s += v * v
    u = _UNIT_ROUNDOFF[precision]
    return s.astype(np.float64) * (1.0 + 2.0 * (k + 2) * u)


def _fast_exponents(M, axis, consts):
    """Scale exponents for rows (axis=1) or columns (axis=0) of ``M``."""
    amax = np.max(np.abs(M), axis=axis) if M.shape[axis] else np.zeros(M.shape[1 - axis])
    nonzero = amax > 0
    emax = floor_log2(np.where(nonzero, amax, 1.0))
    expand = -emax[None, :] if axis == 0 else -emax[:, None]
    normalized = np.ldexp(M, expand.astype(np.int32))
    ssq = _sumsq_upper(normalized, axis, consts.precision)
    with np.errstate(divide="ignore"):
        spread = np.maximum(1.0, 0.51 * np.log2(np.where(nonzero, ssq, 1.0)))
    exps = np.floor(np.float64(consts.Pp_fast) - spread).astype(np.int64) - emax
    return np.where(nonzero, exps, 0), nonzero, emax


def scale_fast(A, B, consts: CrtConstants) -> ScalePair:
    """Fast-mode scale vectors; zero rows/columns get scale 1."""
    A = np.asarray(A)
    B = np.asarray(B)
    mu_exp, _, _ = _fast_exponents(A, 1, consts)
    nu_exp, _, _ = _fast_exponents(B, 0, consts)
    return _pair(mu_exp, nu_exp, "fast")


def _ceil_int8(M, exps, side):
    shift = exps[:, None] if side == "row" else exps[None, :]
    return np.ceil(np.ldexp(np.abs(M), shift.astype(np.int32))).astype(np.int8)


def _wide_int8_gemm(A, B, engine):
    k = A.shape[1]
    if k <= MAX_K:
        return engine(A, B).data.astype(np.int64)
    total = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
    for h in range(0, k, MAX_K):
        total += engine(A[:, h : h + MAX_K], B[h : h + MAX_K, :]).data.astype(np.int64)
    return total


def scale_accurate(A, B, consts: CrtConstants, engine=int8_gemm) -> ScalePair:
    """Accurate-mode scale vectors from the INT8 product of ceil(2**(5-e)|a|) and ceil(|b|2**(5-e)).

    Each exponent is also capped so that scaled entries stay inside the
    input range on which :func:`~crtgemm.residue.rmod_fast` is exact; the cap
    only binds for degenerate rows/columns whose bound product is tiny.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    a_max = np.max(np.abs(A), axis=1) if A.shape[1] else np.zeros(A.shape[0])
    b_max = np.max(np.abs(B), axis=0) if B.shape[0] else np.zeros(B.shape[1])
    a_nz, b_nz = a_max > 0, b_max > 0
    ea = floor_log2(np.where(a_nz, a_max, 1.0))
    eb = floor_log2(np.where(b_nz, b_max, 1.0))
    mu1 = np.where(a_nz, 5 - ea, 0)
    nu1 = np.where(b_nz, 5 - eb, 0)

    Abar = _ceil_int8(A, mu1, "row")
    Bbar = _ceil_int8(B, nu1, "col")
    Cbar = _wide_int8_gemm(Abar, Bbar, engine).astype(np.float64)

    pp = np.float64(consts.Pp_accu)
    limit = rmod_magnitude_limit(consts)

    def finish(first, cmax, emax, nz):
        has = cmax > 0
        with np.errstate(divide="ignore"):
            extra = np.floor(pp - 0.51 * np.log2(np.where(has, cmax, 1.0))).astype(np.int64)
        exps = first + np.where(has, extra, 0)
        # keep |scaled entry| < 2**limit
        exps = np.minimum(exps, limit - 1 - emax)
        return np.where(nz, exps, 0)

    row_max = Cbar.max(axis=1) if Cbar.shape[1] else np.zeros(Cbar.shape[0])
    col_max = Cbar.max(axis=0) if Cbar.shape[0] else np.zeros(Cbar.shape[1])
    mu_exp = finish(mu1, row_max, ea, a_nz)
    nu_exp = finish(nu1, col_max, eb, b_nz)
    return _pair(mu_exp, nu_exp, "accurate")
