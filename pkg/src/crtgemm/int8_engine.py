"""Software INT8 matrix engine: int8 x int8 products with wrapping int32 accumulation.

Two kernels are provided.  ``"reference"`` multiplies in int64 and wraps the
result.  ``"blas"`` (the default) runs FP32 BLAS on k-panels of at most 1024:
every partial sum of such a panel is an integer of magnitude at most
1024 * 2**14 = 2**24, so the FP32 result is exact whatever order the BLAS
library sums in.  Panels are added in int64 and the total wrapped to int32.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

MAX_K = 2**17
EXACT_FP32_PANEL = 1024
_ROW_TILE = 256


@dataclass
class Int32ProductMatrix:
    data: np.ndarray  # int32, shape (m, n)
    k_used: int


def _wrap_int32(x: np.ndarray) -> np.ndarray:
    # astype from int64 to int32 keeps the low 32 bits (two's complement wrap)
    return x.astype(np.int32)


def _panel_product(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    k = A.shape[1]
    acc = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
    for h in range(0, k, EXACT_FP32_PANEL):
        a = A[:, h : h + EXACT_FP32_PANEL].astype(np.float32)
        b = B[h : h + EXACT_FP32_PANEL, :].astype(np.float32)
        acc += (a @ b).astype(np.int64)
    return acc


def _reference_product(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A.astype(np.int64) @ B.astype(np.int64)


def _check_operands(A, B):
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ValueError(f"incompatible operand shapes {A.shape} and {B.shape}")
    for name, M in (("A", A), ("B", B)):
        if M.dtype != np.int8:
            raise TypeError(f"{name} must be int8, got {M.dtype}")
    return A, B


def int8_gemm(A, B, *, kernel: str = "blas", workers: int | None = 1) -> Int32ProductMatrix:
    """Multiply int8 matrices with int32 wraparound accumulation.

    Requires ``k <= 2**17``; at ``k == 2**17`` an entry equal to ``2**31``
    (all operands -128) wraps to ``-2**31``.  Output row tiles are computed
    by up to ``workers`` threads (``None`` means one per CPU); the result
    does not depend on the worker count.
    """
    A, B = _check_operands(A, B)
    m, k = A.shape
    if k > MAX_K:
        raise ValueError(f"inner dimension {k} exceeds {MAX_K}; use blocked_int8_gemm")
    if kernel == "blas":
        product = _panel_product
    elif kernel == "reference":
        product = _reference_product
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    n_workers = (os.cpu_count() or 1) if workers is None else max(1, int(workers))
    if n_workers == 1 or m <= _ROW_TILE:
        return Int32ProductMatrix(_wrap_int32(product(A, B)), k)

    out = np.empty((m, B.shape[1]), dtype=np.int32)

    def tile(r0):
        out[r0 : r0 + _ROW_TILE] = _wrap_int32(product(A[r0 : r0 + _ROW_TILE], B))

    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        list(pool.map(tile, range(0, m, _ROW_TILE)))
    return Int32ProductMatrix(out, k)


def blocked_int8_gemm(A, B, block_k: int, **kwargs) -> list[Int32ProductMatrix]:
    """Split the inner dimension into blocks of ``block_k`` and return each block's product."""
    if not 1 <= block_k <= MAX_K:
        raise ValueError(f"block_k must be in [1, {MAX_K}], got {block_k}")
    A, B = _check_operands(A, B)
    k = A.shape[1]
    return [
        int8_gemm(A[:, h : h + block_k], B[h : h + block_k, :], **kwargs)
        for h in range(0, max(k, 1), block_k)
    ]
