"""End-to-end FP64/FP32 matrix multiplication emulated with INT8 products."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crt_tables import MAX_MODULI, MIN_MODULI, CrtConstants, build_constants
from .errors import ConfigurationError, InputError
from .int8_engine import MAX_K, blocked_int8_gemm, int8_gemm
from .reconstruct import EmulationResult, accumulate, accumulate_products, crt_reduce, mod_u8, unscale
from .residue import to_residue_slices, truncate_scale_exp
from .scaling import scale_accurate, scale_fast

_DTYPES = {"fp64": np.float64, "fp32": np.float32}


@dataclass(frozen=True)
class EmuConfig:
    n_moduli: int = 15
    mode: str = "fast"
    precision: str = "fp64"
    block_k: int = MAX_K
    workers: int | None = 1
    kernel: str = "blas"

    def __post_init__(self):
        if self.precision not in MAX_MODULI:
            raise ConfigurationError(f"precision must be 'fp64' or 'fp32', got {self.precision!r}")
        if self.mode not in ("fast", "accurate"):
            raise ConfigurationError(f"mode must be 'fast' or 'accurate', got {self.mode!r}")
        hi = MAX_MODULI[self.precision]
        if not MIN_MODULI <= self.n_moduli <= hi:
            raise ConfigurationError(
                f"n_moduli must be in [{MIN_MODULI}, {hi}] for {self.precision}, got {self.n_moduli}"
            )
        if not 1 <= self.block_k <= MAX_K:
            raise ConfigurationError(f"block_k must be in [1, {MAX_K}], got {self.block_k}")


def _validate_operands(A, B, precision):
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or B.ndim != 2:
        raise InputError(f"expected 2-D operands, got shapes {A.shape} and {B.shape}")
    if A.shape[1] != B.shape[0]:
        raise InputError(f"inner dimensions differ: {A.shape} x {B.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise InputError("operands must be finite (no NaN or Inf)")
    dtype = _DTYPES[precision]
    return A.astype(dtype), B.astype(dtype)


def _accumulate_blocks(A_slices, B_slices, cfg: EmuConfig, consts: CrtConstants):
    """``(C1, C2)`` from the per-modulus int8 products, k-blocked where needed.

    Blocked products are reduced per block and the residues combined modulo
    ``p_i`` in integer arithmetic, so the outcome matches the unblocked path.
    """
    k = A_slices.source_dims[1]
    engine_kw = dict(kernel=cfg.kernel, workers=cfg.workers)
    pairs = zip(A_slices.slices, B_slices.slices)
    if k <= cfg.block_k:
        return accumulate_products((int8_gemm(a, b, **engine_kw) for a, b in pairs), consts)
    U = []
    for i, (a, b) in enumerate(pairs):
        total = 0
        for block in blocked_int8_gemm(a, b, cfg.block_k, **engine_kw):
            total = total + mod_u8(block.data, i, consts).astype(np.int64)
        U.append((total % consts.moduli[i]).astype(np.uint8))
    return accumulate(U, consts)


def gemm_emulated(A, B, cfg: EmuConfig | None = None, **kwargs) -> EmulationResult:
    """Approximate ``A @ B`` using only int8 matrix products.

    ``cfg`` may be omitted and its fields passed as keyword arguments.  The
    result is FP64 for both input precisions; use
    :meth:`EmulationResult.as_float32` for an FP32 copy.
    """
    if cfg is None:
        cfg = EmuConfig(**kwargs)
    elif kwargs:
        raise TypeError("pass either cfg or keyword arguments, not both")
    A, B = _validate_operands(A, B, cfg.precision)
    consts = build_constants(cfg.n_moduli, cfg.precision)
    return emulate_with_constants(A, B, consts, cfg)


def emulate_with_constants(A, B, consts: CrtConstants, cfg: EmuConfig) -> EmulationResult:
    """Run the pipeline with an explicit constant table (lets tests inject faults)."""
    if cfg.mode == "fast":
        scales = scale_fast(A, B, consts)
    else:
        engine = lambda x, y: int8_gemm(x, y, kernel=cfg.kernel, workers=cfg.workers)  # noqa: E731
        scales = scale_accurate(A, B, consts, engine=engine)

    A_int = truncate_scale_exp(A, scales.mu_exp, "row")
    B_int = truncate_scale_exp(B, scales.nu_exp, "col")
    A_slices = to_residue_slices(A_int, consts)
    B_slices = to_residue_slices(B_int, consts)

    C1, C2 = _accumulate_blocks(A_slices, B_slices, cfg, consts)
    C2prime = crt_reduce(C1, C2, consts)
    return unscale(C2prime, scales, consts)
