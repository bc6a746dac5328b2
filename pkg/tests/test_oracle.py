import csv
import hashlib
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from crtgemm import compare, exact_gemm, gen_matrix

FIXTURES = Path(__file__).parent / "fixtures"


def _fraction_matmul(A, B):
    return [[sum(Fraction(float(a)) * Fraction(float(b)) for a, b in zip(row, col)) for col in B.T] for row in A]


def test_identity():
    ref = exact_gemm(np.eye(4), np.eye(4))
    assert np.array_equal(ref.to_float(), np.eye(4))


def test_point_one_squared_is_not_one_hundredth():
    ref = exact_gemm(np.array([[0.1]]), np.array([[0.1]]))
    value = ref.to_fractions()[0, 0]
    assert value == Fraction(0.1) ** 2
    assert value != Fraction(1, 100)


def test_integer_matrices_match_int64(rng):
    A = rng.integers(-1000, 1000, (8, 8))
    B = rng.integers(-1000, 1000, (8, 8))
    ref = exact_gemm(A.astype(np.float64), B.astype(np.float64))
    assert np.array_equal(ref.to_fractions(), (A @ B).astype(object))


@pytest.mark.parametrize("phi", [0.0, 2.0, 6.0])
def test_matches_fraction_brute_force(phi):
    A, B = gen_matrix(5, 13, phi, 1), gen_matrix(13, 4, phi, 2)
    A[0, 0] = 2.0**-1070  # subnormal
    B[3, 1] = 1e300
    assert (exact_gemm(A, B).to_fractions() == np.array(_fraction_matmul(A, B), dtype=object)).all()


def test_fp32_inputs_and_empty_inner_dimension():
    A = gen_matrix(3, 7, 1.0, 3, "fp32")
    B = gen_matrix(7, 2, 1.0, 4, "fp32")
    assert (exact_gemm(A, B).to_fractions() == np.array(_fraction_matmul(A, B), dtype=object)).all()
    assert not exact_gemm(np.ones((2, 0)), np.ones((0, 3))).to_fractions().any()


def test_to_float_is_correctly_rounded():
    A = np.array([[1.0, 2.0**-60]])
    B = np.array([[1.0], [1.0]])
    assert exact_gemm(A, B).to_float()[0, 0] == 1.0
    assert exact_gemm(np.array([[3.0]]), np.array([[2.0**-1074]])).to_float()[0, 0] == 3 * 2.0**-1074


def test_compare_cases():
    ref = exact_gemm(np.array([[1.0, 0.0], [0.0, 0.0]]), np.eye(2))
    rep = compare(np.array([[1.0, 0.0], [0.0, 0.0]]), ref)
    assert rep.exact_match and rep.max_rel_err == 0.0 and rep.n_elements == 4
    rep = compare(np.array([[np.nextafter(1.0, 2.0), 0.0], [0.0, 0.0]]), ref)
    assert rep.max_rel_err == 2.0**-52 and not rep.exact_match
    rep = compare(np.array([[1.0, 1e-300], [0.0, 0.0]]), ref)
    assert rep.max_rel_err == np.inf and rep.median_rel_err == 0.0
    with pytest.raises(ValueError):
        compare(np.zeros((3, 3)), ref)


def test_compare_reports_are_consistent():
    A, B = gen_matrix(20, 30, 1.0, 5), gen_matrix(30, 10, 1.0, 6)
    ref = exact_gemm(A, B)
    native = compare(A @ B, ref)
    rounded = compare(ref.to_float(), ref)
    assert 0 <= native.median_rel_err <= native.max_rel_err < 1e-10
    assert rounded.max_rel_err <= 2.0**-53


def test_generator_phi_zero_is_uniform():
    M = gen_matrix(200, 500, 0.0, 1)
    assert M.min() > -0.5 and M.max() <= 0.5
    assert abs(M.mean()) < 0.01 and abs(M.var() - 1 / 12) < 0.002


def test_generator_determinism_and_validation():
    assert np.array_equal(gen_matrix(10, 20, 1.5, 42), gen_matrix(10, 20, 1.5, 42))
    assert not np.array_equal(gen_matrix(10, 20, 1.5, 42), gen_matrix(10, 20, 1.5, 43))
    assert gen_matrix(3, 4, 1.0, 0, "fp32").dtype == np.float32
    with pytest.raises(ValueError):
        gen_matrix(2, 2, -1.0, 0)


def test_generator_phi_four_spans_many_binades():
    M = gen_matrix(1000, 1000, 4.0, 7)
    e = np.log2(np.abs(M[M != 0]))
    assert e.max() - e.min() > 30


def _checksum(M):
    return hashlib.sha256(np.ascontiguousarray(M).tobytes()).hexdigest()


def test_generator_golden_checksums():
    with open(FIXTURES / "generator_checksums.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    for r in rows:
        M = gen_matrix(int(r["m"]), int(r["k"]), float(r["phi"]), int(r["seed"]), r["precision"])
        assert _checksum(M) == r["sha256"]
        assert repr(float(M.sum())) == r["sum"]
