"""Residue reduction, weighted FP64 accumulation, CRT reduction and unscaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._fp import fma64
from .crt_tables import CrtConstants


@dataclass
class ResidueProducts:
    U: list[np.ndarray]  # uint8, U[i] in [0, p_i - 1]


@dataclass
class EmulationResult:
    C: np.ndarray
    n_moduli: int
    mode: str
    precision: str

    def as_float32(self) -> np.ndarray:
        return self.C.astype(np.float32)


def mulhi(x, y):
    """High 32 bits of the signed 64-bit product of 32-bit values."""
    return (np.asarray(x, dtype=np.int64) * np.asarray(y, dtype=np.int64)) >> 32


def mod_u8(x, i: int, consts: CrtConstants):
    """Nonnegative residue of int32 ``x`` modulo ``p_i`` without integer division.

    The quotient estimate ``mulhi(x, floor(2**32/p - 1))`` is off by at most
    one in either direction, which the two conditional corrections absorb.
    """
    p = consts.moduli[i]
    x = np.asarray(x, dtype=np.int64)
    y = x - mulhi(x, consts.pinv_mulhi[i]) * p
    y = y - (y >= p) * p
    y = y + (y < 0) * p
    return y.astype(np.uint8)


def reduce_products(products, consts: CrtConstants) -> ResidueProducts:
    """Map each int32 product matrix ``C'_i`` to ``U_i = mod(C'_i, p_i)``."""
    return ResidueProducts([mod_u8(getattr(c, "data", c), i, consts) for i, c in enumerate(products)])


def accumulate(U, consts: CrtConstants):
    """Return ``(sum s1_i U_i, sum s2_i U_i)`` summed in FP64 in index order.

    The first sum is exact by construction of the ``s1`` table.
    """
    U = getattr(U, "U", U)
    s1, s2 = consts.s1, consts.s2
    C1 = np.zeros(np.shape(U[0]), dtype=np.float64)
    C2 = np.zeros_like(C1)
    for i, u in enumerate(U):
        uf = u.astype(np.float64)
        C1 += s1[i] * uf
        C2 += s2[i] * uf
    return C1, C2


def accumulate_products(products, consts: CrtConstants):
    """Fused ``mod_u8`` + :func:`accumulate` over int32 products; ``U_i`` is never kept."""
    s1, s2 = consts.s1, consts.s2
    C1 = C2 = None
    for i, c in enumerate(products):
        uf = mod_u8(getattr(c, "data", c), i, consts).astype(np.float64)
        if C1 is None:
            C1 = np.zeros_like(uf)
            C2 = np.zeros_like(uf)
        C1 += s1[i] * uf
        C2 += s2[i] * uf
    return C1, C2


def crt_reduce(C1, C2, consts: CrtConstants):
    """Symmetric reduction of ``C1 + C2`` modulo ``P`` using ``P = P1 + P2``."""
    C1 = np.asarray(C1, dtype=np.float64)
    C2 = np.asarray(C2, dtype=np.float64)
    Q = np.rint(consts.P_inv * C1)
    return fma64(-consts.P2, Q, fma64(-consts.P1, Q, C1) + C2)


def unscale(C2prime, scales, consts: CrtConstants | None = None) -> EmulationResult:
    """Undo the power-of-two row and column scaling (exact barring under/overflow)."""
    shift = -(scales.mu_exp[:, None] + scales.nu_exp[None, :])
    C = np.ldexp(np.asarray(C2prime, dtype=np.float64), shift.astype(np.int32))
    return EmulationResult(
        C=C,
        n_moduli=consts.n_moduli if consts is not None else 0,
        mode=scales.mode,
        precision=consts.precision if consts is not None else "fp64",
    )
