"""FP64/FP32 matrix multiplication emulated with INT8 products and the Chinese Remainder Theorem."""

from .crt_tables import CrtConstants, ModulusSet, build_constants, mod_inverse, select_moduli
from .emulator import EmuConfig, gemm_emulated
from .errors import ConfigurationError, InputError
from .oracle import ErrorReport, ExactMatrix, compare, exact_gemm, gen_matrix
from .reconstruct import EmulationResult

__all__ = [
    "ConfigurationError",
    "CrtConstants",
    "EmuConfig",
    "EmulationResult",
    "ErrorReport",
    "ExactMatrix",
    "InputError",
    "ModulusSet",
    "build_constants",
    "compare",
    "exact_gemm",
    "gemm_emulated",
    "gen_matrix",
    "mod_inverse",
    "select_moduli",
]
