"""Scaled truncation and signed 8-bit residue extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._fp import fma32, fma64
from .crt_tables import CrtConstants

# (N1, N2): number of moduli at which the first and second refinement steps kick in
REFINE_THRESHOLDS = {"fp64": (13, 19), "fp32": (5, 11)}

# |x| < 2**limit keeps every remainder exact in FP32 and inside int8 after the
# last refinement step; indexed by the number of refinement steps applied.
# Measured failure onsets sit one bit or more above these values.
_RMOD_LOG2_LIMIT = {"fp64": (50, 74, 86), "fp32": (21, 45, 68)}


@dataclass
class ResidueSlices:
    """``n_moduli`` int8 matrices, slice ``i`` congruent to the source modulo ``p_i``.

    Slices are stored column-major (Fortran order, leading dimension = rows).
    """

    n_moduli: int
    slices: list[np.ndarray]
    source_dims: tuple[int, int]


def refinement_steps(consts: CrtConstants) -> int:
    n1, n2 = REFINE_THRESHOLDS[consts.precision]
    return int(consts.n_moduli >= n1) + int(consts.n_moduli >= n2)


def rmod_magnitude_limit(consts: CrtConstants) -> int:
    """Exponent ``L`` such that :func:`rmod_fast` is exact for ``|x| < 2**L``."""
    return _RMOD_LOG2_LIMIT[consts.precision][refinement_steps(consts)]


def truncate_scale_exp(M, exps, side: str = "row"):
    """Scale rows or columns of ``M`` by ``2**exps`` and truncate toward zero."""
    M = np.asarray(M)
    exps = np.asarray(exps).astype(np.int32)
    if side == "row":
        scaled = np.ldexp(M, exps[:, None])
    elif side == "col":
        scaled = np.ldexp(M, exps[None, :])
    else:
        raise ValueError(f"side must be 'row' or 'col', got {side!r}")
    return np.trunc(scaled).astype(M.dtype, copy=False)


def truncate_scale(M, scale, side: str = "row"):
    """Multiply rows (``side="row"``) or columns (``side="col"``) by ``scale``, then truncate toward zero.

    ``scale`` must hold powers of two; the multiplication is done by exponent
    adjustment, so it is exact and the result keeps the dtype of ``M``.
    """
    _, e = np.frexp(np.asarray(scale, dtype=np.float64))
    return truncate_scale_exp(M, e.astype(np.int64) - 1, side)


def _refine(y, p, pinv32):
    q = np.rint(y * pinv32)
    return fma32(q, np.float32(-p), y)


def rmod_fast(x, i: int, consts: CrtConstants):
    """Symmetric remainder of integer-valued ``x`` modulo ``p_i`` as int8.

    Uses a rounded reciprocal multiply and a fused multiply-add instead of a
    division; one or two FP32 refinement passes are added for larger ``N``.
    The 256 modulus may yield 128, which wraps to -128 in the int8 cast.
    """
    p = consts.moduli[i]
    n = consts.n_moduli
    n1, n2 = REFINE_THRESHOLDS[consts.precision]
    pinv32 = consts.pinv32[i]
    if consts.precision == "fp64":
        x = np.asarray(x, dtype=np.float64)
        q = np.rint(x * consts.pinv64[i])
        y = fma64(q, float(-p), x).astype(np.float32)
    else:
        x = np.asarray(x, dtype=np.float32)
        q = np.rint(x * pinv32)
        y = fma32(q, np.float32(-p), x)
    if n >= n1:
        y = _refine(y, p, pinv32)
    if n >= n2:
        y = _refine(y, p, pinv32)
    return y.astype(np.int16).astype(np.int8)


def to_residue_slices(M, consts: CrtConstants) -> ResidueSlices:
    """Apply :func:`rmod_fast` for every modulus to an integer-valued matrix."""
    M = np.asarray(M)
    slices = [np.asfortranarray(rmod_fast(M, i, consts)) for i in range(consts.n_moduli)]
    return ResidueSlices(n_moduli=consts.n_moduli, slices=slices, source_dims=M.shape)
