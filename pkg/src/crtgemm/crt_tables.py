"""Modulus sets and the precomputed constant tables used by the emulation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache, reduce
from operator import mul

import numpy as np

from .errors import ConfigurationError

MAX_MODULI = {"fp64": 20, "fp32": 18}
MIN_MODULI = 2


@dataclass(frozen=True)
class ModulusSet:
    n_moduli: int
    moduli: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class CrtConstants:
    """Every constant the emulation needs for one ``(N, precision)`` pair.

    Big-integer fields (``big_P``, ``q``, ``weights``) are exact; the array
    fields are read-only NumPy vectors indexed by modulus.
    """

    modulus_set: ModulusSet
    precision: str
    big_P: int
    q: tuple[int, ...]
    weights: tuple[int, ...]  # P/p_i * q_i
    beta: tuple[int, ...]
    P1: float
    P2: float
    P_inv: float
    Pp_fast: np.float32
    Pp_accu: np.float32
    s1: np.ndarray
    s2: np.ndarray
    pinv64: np.ndarray
    pinv32: np.ndarray
    pinv_mulhi: np.ndarray

    @property
    def n_moduli(self) -> int:
        return self.modulus_set.n_moduli

    @property
    def moduli(self) -> tuple[int, ...]:
        return self.modulus_set.moduli

    @property
    def p(self) -> np.ndarray:
        return np.array(self.moduli, dtype=np.int64)


def _check_n(n: int, precision: str = "fp64") -> None:
    if precision not in MAX_MODULI:
        raise ConfigurationError(f"unknown precision {precision!r}; expected 'fp64' or 'fp32'")
    hi = MAX_MODULI[precision]
    if not isinstance(n, (int, np.integer)) or not MIN_MODULI <= n <= hi:
        raise ConfigurationError(
            f"number of moduli must be in [{MIN_MODULI}, {hi}] for {precision}, got {n!r}"
        )


@lru_cache(maxsize=None)
def _greedy_moduli() -> tuple[int, ...]:
    kept: list[int] = []
    cand = 256
    while len(kept) < MAX_MODULI["fp64"]:
        if all(math.gcd(cand, m) == 1 for m in kept):
            kept.append(cand)
        cand -= 1
    return tuple(kept)


def select_moduli(n: int) -> ModulusSet:
    """First ``n`` entries of the descending pairwise-coprime sequence from 256.

    >>> select_moduli(5).moduli
    (256, 255, 253, 251, 247)
    """
    _check_n(n)
    return ModulusSet(n_moduli=int(n), moduli=_greedy_moduli()[:n])


def mod_inverse(a: int, m: int) -> int:
    """Inverse of ``a`` modulo ``m`` in ``[1, m-1]`` via the extended Euclidean algorithm."""
    if m < 2:
        raise ValueError(f"modulus must be at least 2, got {m}")
    old_r, r = a % m, m
    old_s, s = 1, 0
    while r:
        quot = old_r // r
        old_r, r = r, old_r - quot * r
        old_s, s = s, old_s - quot * s
    if old_r != 1:
        raise ValueError(f"{a} has no inverse modulo {m} (gcd = {old_r})")
    return old_s % m


def _top_bits(x: int, nbits: int) -> int:
    drop = x.bit_length() - nbits
    return x if drop <= 0 else (x >> drop) << drop


@lru_cache(maxsize=None)
def build_constants(n: int, precision: str = "fp64") -> CrtConstants:
    """Build (and cache) the constant table for ``n`` moduli.

    For ``fp64`` the CRT weights are split as ``s1 + s2`` with ``s1`` holding
    only its top ``beta_i`` bits, so that ``sum(s1_i * U_i)`` over residues
    ``U_i < 256`` is exact in FP64.  For ``fp32`` both ``P2`` and ``s2`` are 0.
    """
    _check_n(n, precision)
    mset = select_moduli(n)
    moduli = mset.moduli
    big_P = reduce(mul, moduli, 1)
    q = tuple(mod_inverse(big_P // p, p) for p in moduli)
    weights = tuple(big_P // p * qi for p, qi in zip(moduli, q))

    # floor(log2 w) == bit_length - 1 for positive integers
    top = max(w.bit_length() - 1 for w in weights)
    ceil_log2_n = (n - 1).bit_length()
    beta = tuple(53 - 8 - ceil_log2_n + (w.bit_length() - 1) - top for w in weights)
    if min(beta) < 1:
        raise ConfigurationError(f"table construction for N={n} gives beta < 1")

    P1 = float(big_P)
    if precision == "fp64":
        P2 = float(big_P - int(P1))
        s1_int = [_top_bits(w, b) for w, b in zip(weights, beta)]
        s1 = [float(v) for v in s1_int]
        s2 = [float(w - v) for w, v in zip(weights, s1_int)]
    else:
        P2 = 0.0
        s1 = [float(w) for w in weights]
        s2 = [0.0] * n

    log2_pm1 = math.log2(big_P - 1)

    def ro(values, dtype):
        arr = np.array(values, dtype=dtype)
        arr.setflags(write=False)
        return arr

    return CrtConstants(
        modulus_set=mset,
        precision=precision,
        big_P=big_P,
        q=q,
        weights=weights,
        beta=beta,
        P1=P1,
        P2=P2,
        P_inv=1 / big_P,
        Pp_fast=np.float32(0.5 * log2_pm1 - 1.5),
        Pp_accu=np.float32(0.5 * log2_pm1 - 0.5),
        s1=ro(s1, np.float64),
        s2=ro(s2, np.float64),
        pinv64=ro([1.0 / p for p in moduli], np.float64),
        pinv32=ro([np.float32(1.0 / p) for p in moduli], np.float32),
        pinv_mulhi=ro([(2**32) // p - 1 for p in moduli], np.int64),
    )


def dump_tables_csv(consts: CrtConstants, path=None) -> str:
    """Write one row per modulus (``p, q, beta, s1, s2``; floats as hex) and return the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["p", "q", "beta", "s1", "s2"])
    for i, p in enumerate(consts.moduli):
        writer.writerow(
            [p, consts.q[i], consts.beta[i], float(consts.s1[i]).hex(), float(consts.s2[i]).hex()]
        )
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
