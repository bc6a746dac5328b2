"""
One emulated product, step by step
===================================

Follows a single FP64 product through every stage of the pipeline and
checks the intermediate values against exact integer arithmetic.
"""

import numpy as np

from crtgemm import compare, exact_gemm, gen_matrix
from crtgemm.crt_tables import build_constants
from crtgemm.int8_engine import int8_gemm
from crtgemm.reconstruct import accumulate_products, crt_reduce, unscale
from crtgemm.residue import to_residue_slices, truncate_scale_exp
from crtgemm.scaling import scale_fast

N = 14
consts = build_constants(N)
print("moduli:", consts.moduli)
print("P has", consts.big_P.bit_length(), "bits")

A = gen_matrix(6, 40, 1.0, seed=0)
B = gen_matrix(40, 5, 1.0, seed=1)

# power-of-two scaling, then truncation to integers
scales = scale_fast(A, B, consts)
A_int = truncate_scale_exp(A, scales.mu_exp, "row")
B_int = truncate_scale_exp(B, scales.nu_exp, "col")
bound = 2 * (np.abs(A_int).astype(object) @ np.abs(B_int).astype(object)).max()
print("uniqueness bound 2*sum|a'||b'| < P:", bound < consts.big_P)

# one int8 slice per modulus; each product is an exact int32 matrix
A_sl = to_residue_slices(A_int, consts)
B_sl = to_residue_slices(B_int, consts)
products = [int8_gemm(a, b) for a, b in zip(A_sl.slices, B_sl.slices)]
print("int32 product 0, entry (0, 0):", products[0].data[0, 0])

# residues weighted into two FP64 accumulators, then reduced modulo P
C1, C2 = accumulate_products(products, consts)
C_scaled = crt_reduce(C1, C2, consts)
exact_scaled = A_int.astype(object) @ B_int.astype(object)
print("scaled product, entry (0, 0):", C_scaled[0, 0], "exact:", exact_scaled[0, 0])

C = unscale(C_scaled, scales, consts).C
report = compare(C, exact_gemm(A, B))
print("max relative error vs exact product:", report.max_rel_err)
print("plain FP64 matmul:                  ", compare(A @ B, exact_gemm(A, B)).max_rel_err)
