"""Exact ground states of H(x) at desk scale and ground-state expectations.

Dense LAPACK diagonalization up to ``dense_cutoff`` qubits, ARPACK Lanczos
beyond (up to ``capacity``).  The ground state is the uniform mixture over
the lowest eigenspace; degenerate levels are grouped within a relative
tolerance and the gap is reported against the first excluded level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CapacityError, ConvergenceError
from .lattice import Observable, ParamHamiltonian, PauliString, assemble_matrix

_RESIDUAL_TOL = 1e-8
_IMAG_TOL = 1e-10


@dataclass
class SolverConfig:
    capacity: int = 16
    dense_cutoff: int = 12
    method: str = "auto"          # auto | dense | lanczos
    k_lowest: int = 8             # initial number of levels to resolve
    max_k: int = 128              # give up widening the window past this
    degeneracy_rtol: float = 1e-9
    lanczos_maxiter: Optional[int] = None
    seed: int = 7


@dataclass
class GroundStateSolution:
    """Ground energy, spectral gap, and an orthonormal ground-space basis.

    ``ground_basis`` holds the basis vectors as columns of a (2^n, g) array.
    """

    energy: float
    gap: float
    ground_basis: np.ndarray
    degeneracy: int

    @property
    def dim(self) -> int:
        return self.ground_basis.shape[0]


def _is_real(mat: sp.csr_matrix) -> bool:
    return mat.nnz == 0 or float(np.abs(mat.data.imag).max()) <= 1e-14


def _dense_lowest(mat: sp.csr_matrix, k: int):
    a = mat.toarray()
    if np.abs(a.imag).max() <= 1e-14:
        a = a.real
    dim = a.shape[0]
    k = min(k, dim)
    vals, vecs = scipy.linalg.eigh(a, subset_by_index=(0, k - 1))
    return vals, vecs


def _lanczos_lowest(mat: sp.csr_matrix, k: int, cfg: SolverConfig):
    dim = mat.shape[0]
    k = min(k, dim - 2)  # ARPACK requires k < dim - 1
    rng = np.random.default_rng(cfg.seed)
    if _is_real(mat):
        mat = mat.real.tocsr()
        v0 = rng.standard_normal(dim)
    else:
        v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    try:
        vals, vecs = spla.eigsh(mat, k=k, which="SA", v0=v0,
                                maxiter=cfg.lanczos_maxiter)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(
            "Lanczos failed to converge",
            details={
                "converged_eigenvalues": len(exc.eigenvalues),
                "requested": k,
            },
        ) from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def ground_state(ham: ParamHamiltonian, x: np.ndarray,
                 cfg: SolverConfig | None = None) -> GroundStateSolution:
    """Solve for the ground space of H(x).

    Widens the eigenvalue window until the degenerate ground group is
    separated from the first excluded level (or the full spectrum is in
    hand), then reports the gap against that level.
    """
    cfg = cfg or SolverConfig()
    n = ham.n_sites
    if n > cfg.capacity:
        raise CapacityError(f"{n} sites exceeds capacity {cfg.capacity}")
    mat = assemble_matrix(ham, x, capacity=cfg.capacity)
    dim = mat.shape[0]

    method = cfg.method
    if method == "auto":
        method = "dense" if n <= cfg.dense_cutoff else "lanczos"
    if method not in ("dense", "lanczos"):
        raise ValueError(f"unknown method {cfg.method!r}")

    k = min(cfg.k_lowest, dim if method == "dense" else dim - 2)
    while True:
        if method == "dense":
            vals, vecs = _dense_lowest(mat, k)
        else:
            vals, vecs = _lanczos_lowest(mat, k, cfg)
        e0 = float(vals[0])
        tol = max(cfg.degeneracy_rtol, cfg.degeneracy_rtol * abs(e0))
        g = int(np.searchsorted(vals - e0, tol, side="right"))
        if g < len(vals):
            gap = float(vals[g] - e0)
            break
        if len(vals) >= dim:
            # fully degenerate spectrum (e.g. the zero Hamiltonian)
            gap = 0.0
            break
        if k >= min(cfg.max_k, dim):
            raise ConvergenceError(
                "could not separate the ground group from the rest of the "
                "spectrum",
                details={"levels_resolved": int(len(vals)), "max_k": cfg.max_k},
            )
        k = min(max(2 * k, k + 1), dim if method == "dense" else dim - 2)

    basis = np.ascontiguousarray(vecs[:, :g])
    # orthonormality comes out of the solvers; the residual is a hard check
    for col in range(g):
        v = basis[:, col]
        res = np.linalg.norm(mat @ v - e0 * v)
        if res > _RESIDUAL_TOL:
            raise ConvergenceError(
                "eigenvector residual above tolerance",
                details={"residual": float(res), "column": col},
            )
    return GroundStateSolution(energy=e0, gap=gap, ground_basis=basis,
                               degeneracy=g)


# ---------------------------------------------------------------------------
# Expectations
# ---------------------------------------------------------------------------


def apply_pauli(p: PauliString, state: np.ndarray) -> np.ndarray:
    """P |psi> via bit arithmetic; O(2^n), no matrix built."""
    dim = state.shape[0]
    n = dim.bit_length() - 1
    if 1 << n != dim:
        raise ValueError("state dimension must be a power of two")
    flip = 0
    zy = 0
    n_y = 0
    for site, letter in p.factors:
        if site >= n:
            raise ValueError(f"site {site} outside a {n}-qubit register")
        bit = 1 << (n - 1 - site)
        if letter in ("X", "Y"):
            flip |= bit
        if letter in ("Z", "Y"):
            zy |= bit
        if letter == "Y":
            n_y += 1
    idx = np.arange(dim, dtype=np.int64)
    parity = np.bitwise_count(idx & zy) & 1
    phase = (1j**n_y) * np.where(parity, -1.0, 1.0)
    out = np.empty(dim, dtype=np.complex128)
    out[idx ^ flip] = phase * state
    return out


def pauli_expectation(p: PauliString, state: np.ndarray) -> float:
    """<psi| P |psi> for a unit-norm state vector."""
    val = np.vdot(state, apply_pauli(p, state))
    if abs(val.imag) > _IMAG_TOL:
        raise ValueError(f"expectation has imaginary residue {val.imag:.3e}")
    return float(val.real)


def expectation(obs: Observable, gs: GroundStateSolution) -> float:
    """tr(O rho) with rho the uniform mixture over the ground basis.

    The result is clamped to [-sum|alpha_P|, +sum|alpha_P|].
    """
    dim = gs.dim
    for _, p in obs.components:
        if p.support and max(p.support) >= dim.bit_length() - 1:
            raise ValueError("observable acts outside the register")
    total = 0.0
    for col in range(gs.degeneracy):
        v = gs.ground_basis[:, col]
        for alpha, p in obs.components:
            total += alpha * pauli_expectation(p, v)
    val = total / gs.degeneracy
    bound = obs.abs_coeff_sum
    return float(np.clip(val, -bound, bound))
