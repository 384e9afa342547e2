"""Shared fixtures and independent dense oracles for the test suite.

The oracles build operators by explicit Kronecker products (site 0 is the
leftmost factor), independent of the package's bit-arithmetic paths.
"""

import numpy as np
import pytest

I2 = np.eye(2, dtype=complex)
PAULI_MATS = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_pauli(factors: dict, n: int) -> np.ndarray:
    """Dense matrix of a Pauli string via explicit kron products."""
    out = np.array([[1.0 + 0j]])
    for site in range(n):
        out = np.kron(out, PAULI_MATS.get(factors.get(site), I2))
    return out


def dense_heisenberg(bonds, couplings, n: int) -> np.ndarray:
    """sum_b J_b (XX + YY + ZZ) on the given bonds, dense."""
    h = np.zeros((2**n, 2**n), dtype=complex)
    for (i, j), coupling in zip(bonds, couplings):
        for letter in "XYZ":
            h += coupling * kron_pauli({i: letter, j: letter}, n)
    return h


def random_state(n: int, rng) -> np.ndarray:
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
