import numpy as np
import pytest

from crtgemm.oracle import _decompose


def exact_residue(x, p):
    """Nonnegative residue of integer-valued floats ``x`` modulo ``p``, computed exactly.

    Works for magnitudes beyond int64 by splitting ``x = sig * 2**e``.
    """
    sig, e = _decompose(np.asarray(x, dtype=np.float64))
    out = np.empty(sig.shape, dtype=np.int64)
    neg = e < 0
    # integer-valued: the low -e bits of the significand are zero
    out[neg] = (sig[neg] >> (-e[neg])) % p
    pos = ~neg
    if np.any(pos):
        pow2 = np.array([pow(2, int(v), p) for v in range(int(e[pos].max()) + 1)], dtype=np.int64)
        out[pos] = (sig[pos] % p) * pow2[e[pos]] % p
    return out


def symmetric(r, p):
    """Map nonnegative residues to the nearest-to-zero representative."""
    r = np.asarray(r, dtype=np.int64)
    return np.where(r > p // 2, r - p, r)


def random_integers_below(rng, log2_limit, size, dtype=np.float64):
    """Integer-valued floats with log-uniform magnitude below ``2**log2_limit`` and random sign."""
    mag = np.exp2(rng.uniform(0, log2_limit, size))
    x = np.trunc(mag) * rng.choice([-1.0, 1.0], size)
    x = x.astype(dtype)
    return x[np.abs(x.astype(np.float64)) < 2.0**log2_limit]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
