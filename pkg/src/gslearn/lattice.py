"""Lattice geometry, Pauli strings, and parameterized spin-1/2 Hamiltonians.

Provides the random-bond Heisenberg family

    H(x) = sum_j J_j (X X + Y Y + Z Z)   with J_j = x_j + 1 in [0, 2],

its nearest-neighbor correlation observables C_ij = (XX + YY + ZZ)/3, and the
geometric machinery the learning algorithms need: observable distances, the
local coordinate sets I_P, enumeration of the geometrically local Pauli set,
and assembly of the 2^n sparse Hamiltonian matrix.

Conventions: sites are indexed row-major on the grid; site i maps to qubit
bit (n - 1 - i) of the computational-basis index, i.e. basis vectors are
|q_0 q_1 ... q_{n-1}> with site 0 leftmost (matching kron order).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .errors import CapacityError

PAULI_LETTERS = ("X", "Y", "Z")

#: Default solver capacity in qubits; 2^16 state vectors are the practical
#: desk-scale memory limit.
DEFAULT_CAPACITY = 16


@dataclass(frozen=True)
class Lattice:
    """Sites at integer coordinates in Z^d with a bond graph.

    The metric is either the graph (shortest-path) distance on the bond
    graph or the Euclidean distance between coordinates.
    """

    n_sites: int
    positions: tuple[tuple[int, ...], ...]
    bonds: tuple[tuple[int, int], ...]
    metric: str = "graph"

    def __post_init__(self):
        if len(self.positions) != self.n_sites:
            raise ValueError("positions must list every site")
        for (i, j) in self.bonds:
            if i == j or not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise ValueError(f"invalid bond ({i}, {j})")
        if self.metric not in ("graph", "euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")

    @cached_property
    def _dist(self) -> np.ndarray:
        if self.metric == "euclidean":
            pos = np.asarray(self.positions, dtype=float)
            diff = pos[:, None, :] - pos[None, :, :]
            return np.sqrt((diff**2).sum(axis=-1))
        adj = sp.lil_matrix((self.n_sites, self.n_sites))
        for i, j in self.bonds:
            adj[i, j] = 1
            adj[j, i] = 1
        return shortest_path(adj.tocsr(), method="D", unweighted=True)

    def distance(self, i: int, j: int) -> float:
        """Distance between sites i and j under the configured metric."""
        return float(self._dist[i, j])

    @cached_property
    def diameter(self) -> float:
        d = self._dist[np.isfinite(self._dist)]
        return float(d.max()) if d.size else 0.0

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "positions": [list(p) for p in self.positions],
            "bonds": [list(b) for b in self.bonds],
            "metric": self.metric,
        }

    @staticmethod
    def from_dict(d: dict) -> "Lattice":
        return Lattice(
            n_sites=d["n_sites"],
            positions=tuple(tuple(p) for p in d["positions"]),
            bonds=tuple(tuple(b) for b in d["bonds"]),
            metric=d["metric"],
        )


@dataclass(frozen=True, order=True)
class PauliString:
    """A non-identity Pauli string, stored sparsely as sorted (site, letter) pairs.

    Identity factors are omitted; the support is the set of listed sites.
    Ordering is lexicographic in the (site, letter) pairs, which fixes the
    deterministic indexing used everywhere downstream.
    """

    factors: tuple[tuple[int, str], ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("identity strings are not represented")
        sites = [s for s, _ in self.factors]
        if sites != sorted(set(sites)):
            raise ValueError("factors must be sorted by site with unique sites")
        for _, letter in self.factors:
            if letter not in PAULI_LETTERS:
                raise ValueError(f"invalid Pauli letter {letter!r}")

    @staticmethod
    def from_map(factors: dict[int, str]) -> "PauliString":
        return PauliString(tuple(sorted(factors.items())))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.factors)

    @property
    def weight(self) -> int:
        return len(self.factors)

    def __str__(self):
        return " ".join(f"{l}{s}" for s, l in self.factors)


@dataclass(frozen=True)
class LocalTerm:
    """One geometrically local term h_j(x_j) of the Hamiltonian.

    The term evaluates to sum_k eval(x_slice)[k] * base_coeff_k * P_k.
    ``max_norm`` records sup_x ||h_j(x)||_inf over x in [-1,1]^q; assumption
    (b)'s unit bound is tracked through this factor rather than enforced.
    """

    base_ops: tuple[tuple[float, PauliString], ...]
    param_slice: tuple[int, ...]
    eval_coeffs: Callable[[np.ndarray], np.ndarray]
    max_norm: float
    kind: str = "generic"

    @cached_property
    def support(self) -> tuple[int, ...]:
        sites = set()
        for _, p in self.base_ops:
            sites.update(p.support)
        return tuple(sorted(sites))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "base_ops": [[c, [[s_, l_] for s_, l_ in p.factors]]
                         for c, p in self.base_ops],
            "param_slice": list(self.param_slice),
            "max_norm": self.max_norm,
        }


@dataclass(frozen=True)
class ParamHamiltonian:
    """H(x) = sum_j h_j(x_j) for x in [-1,1]^m over a fixed lattice."""

    lattice: Lattice
    terms: tuple[LocalTerm, ...]
    m: int

    def __post_init__(self):
        seen: set[int] = set()
        for t in self.terms:
            for c in t.param_slice:
                if c in seen:
                    raise ValueError(f"coordinate {c} owned by two terms")
                seen.add(c)
        if seen != set(range(self.m)):
            raise ValueError("param slices must partition {0..m-1}")

    @cached_property
    def term_of_coord(self) -> tuple[int, ...]:
        owner = [0] * self.m
        for j, t in enumerate(self.terms):
            for c in t.param_slice:
                owner[c] = j
        return tuple(owner)

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    def to_dict(self) -> dict:
        return {
            "lattice": self.lattice.to_dict(),
            "terms": [t.to_dict() for t in self.terms],
            "m": self.m,
        }


@dataclass(frozen=True)
class Observable:
    """A real linear combination sum_P alpha_P P of Pauli strings."""

    components: tuple[tuple[float, PauliString], ...]
    name: str = ""

    @cached_property
    def abs_coeff_sum(self) -> float:
        """sum_P |alpha_P|, which bounds |tr(O rho)|."""
        return float(sum(abs(a) for a, _ in self.components))

    def coeff_of(self, p: PauliString) -> float:
        for a, q in self.components:
            if q == p:
                return a
        return 0.0

    def support_diameter(self, lattice: Lattice) -> float:
        worst = 0.0
        for _, p in self.components:
            for i in p.support:
                for j in p.support:
                    worst = max(worst, lattice.distance(i, j))
        return worst

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "components": [[a, [[s_, l_] for s_, l_ in p.factors]]
                           for a, p in self.components],
        }

    @staticmethod
    def from_dict(d: dict) -> "Observable":
        comps = tuple(
            (float(a), PauliString(tuple((int(s), l) for s, l in fac)))
            for a, fac in d["components"]
        )
        return Observable(comps, name=d.get("name", ""))


# ---------------------------------------------------------------------------
# Heisenberg family builders
# ---------------------------------------------------------------------------


def _grid_lattice(rows: int, cols: int) -> Lattice:
    positions = tuple((r, c) for r in range(rows) for c in range(cols))
    bonds = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                bonds.append((i, i + 1))
            if r + 1 < rows:
                bonds.append((i, i + cols))
    return Lattice(rows * cols, positions, tuple(sorted(bonds)))


def _heisenberg_term(i: int, j: int, coord: int) -> LocalTerm:
    base = tuple(
        (1.0, PauliString(((i, l), (j, l)))) for l in PAULI_LETTERS
    )

    def eval_coeffs(x_slice: np.ndarray) -> np.ndarray:
        # J = x + 1 maps the stored parameter back to the coupling in [0, 2]
        return np.full(3, float(x_slice[0]) + 1.0)

    # ||J (XX+YY+ZZ)|| <= 2 * 3 = 6: recorded, not enforced (see module doc)
    return LocalTerm(base, (coord,), eval_coeffs, max_norm=6.0,
                     kind="heisenberg_bond")


def _correlation_observables(pairs: Sequence[tuple[int, int]]) -> list[Observable]:
    obs = []
    for i, j in pairs:
        comps = tuple(
            (1.0 / 3.0, PauliString(((i, l), (j, l)))) for l in PAULI_LETTERS
        )
        obs.append(Observable(comps, name=f"C_{i}_{j}"))
    return obs


def build_heisenberg(rows: int, cols: int, capacity: int = DEFAULT_CAPACITY):
    """Random-bond Heisenberg model on an open rows x cols grid.

    One parameter per nearest-neighbor bond; returns the Hamiltonian family
    and the two-body correlation observables C_ij = (XX+YY+ZZ)/3 for every
    bond <ij>.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if rows * cols > capacity:
        raise CapacityError(
            f"{rows}x{cols} = {rows * cols} sites exceeds capacity {capacity}")
    lattice = _grid_lattice(rows, cols)
    terms = tuple(
        _heisenberg_term(i, j, c) for c, (i, j) in enumerate(lattice.bonds)
    )
    ham = ParamHamiltonian(lattice, terms, m=len(lattice.bonds))
    return ham, _correlation_observables(lattice.bonds)


def build_heisenberg_allpairs(rows: int, cols: int,
                              capacity: int = DEFAULT_CAPACITY):
    """All-to-all variant: one coupling per unordered site pair.

    The lattice geometry (and hence the metric and the observables) stays
    the nearest-neighbor grid; only the interaction graph is complete.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    n = rows * cols
    if n > capacity:
        raise CapacityError(
            f"{rows}x{cols} = {n} sites exceeds capacity {capacity}")
    lattice = _grid_lattice(rows, cols)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    terms = tuple(
        _heisenberg_term(i, j, c) for c, (i, j) in enumerate(pairs)
    )
    ham = ParamHamiltonian(lattice, terms, m=len(pairs))
    return ham, _correlation_observables(lattice.bonds)


def map_couplings(J: np.ndarray) -> np.ndarray:
    """Map couplings J in [0,2]^m to parameters x = J - 1 in [-1,1]^m."""
    J = np.asarray(J, dtype=float)
    if np.any(J < 0.0) or np.any(J > 2.0):
        raise ValueError("couplings must lie in [0, 2]")
    return J - 1.0


def inverse_map_couplings(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`map_couplings`: J = x + 1."""
    x = np.asarray(x, dtype=float)
    if np.any(x < -1.0) or np.any(x > 1.0):
        raise ValueError("parameters must lie in [-1, 1]")
    return x + 1.0


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def obs_distance(p: PauliString, q: PauliString, lattice: Lattice) -> float:
    """Minimum lattice distance between the supports of two Pauli strings."""
    if not p.factors or not q.factors:
        raise ValueError("obs_distance requires non-identity strings")
    return min(
        lattice.distance(i, j) for i in p.support for j in q.support
    )


def _term_distance(term: LocalTerm, p: PauliString, lattice: Lattice) -> float:
    return min(
        lattice.distance(i, j) for i in term.support for j in p.support
    )


def local_coordinates(p: PauliString, ham: ParamHamiltonian,
                      delta1: float) -> tuple[int, ...]:
    """The coordinate set I_P: all c whose owning term is within delta1 of P.

    Returned in increasing coordinate order (deterministic).
    """
    if delta1 < 0:
        raise ValueError("delta1 must be >= 0")
    coords: list[int] = []
    for term in ham.terms:
        if _term_distance(term, p, ham.lattice) <= delta1:
            coords.extend(term.param_slice)
    return tuple(sorted(coords))


def enumerate_geo_paulis(lattice: Lattice, radius: int = 1,
                         max_weight: int = 2) -> list[PauliString]:
    """All non-identity Pauli strings supported in a radius-ball.

    A support set qualifies if some site's ball of the given radius contains
    it and it has at most ``max_weight`` sites.  Output is sorted in the
    deterministic (site, letter) lexicographic order.
    """
    if radius < 1 or max_weight < 1:
        raise ValueError("radius and max_weight must be >= 1")
    n = lattice.n_sites
    balls = [
        frozenset(j for j in range(n) if lattice.distance(i, j) <= radius)
        for i in range(n)
    ]
    supports: set[tuple[int, ...]] = set()
    for ball in balls:
        members = sorted(ball)
        for w in range(1, min(max_weight, len(members)) + 1):
            supports.update(itertools.combinations(members, w))
    out: list[PauliString] = []
    for supp in supports:
        for letters in itertools.product(PAULI_LETTERS, repeat=len(supp)):
            out.append(PauliString(tuple(zip(supp, letters))))
    out.sort()
    return out


# ---------------------------------------------------------------------------
# Matrix assembly
# ---------------------------------------------------------------------------


def pauli_matrix(p: PauliString, n_sites: int) -> sp.csr_matrix:
    """Sparse 2^n matrix of a Pauli string (one nonzero per column)."""
    dim = 1 << n_sites
    flip = 0
    zy = 0
    n_y = 0
    for site, letter in p.factors:
        bit = 1 << (n_sites - 1 - site)
        if letter in ("X", "Y"):
            flip |= bit
        if letter in ("Z", "Y"):
            zy |= bit
        if letter == "Y":
            n_y += 1
    cols = np.arange(dim, dtype=np.int64)
    rows = cols ^ flip
    parity = np.bitwise_count(cols & zy) & 1
    data = (1j**n_y) * np.where(parity, -1.0, 1.0)
    return sp.csr_matrix((data.astype(np.complex128), (rows, cols)),
                         shape=(dim, dim))


def assemble_matrix(ham: ParamHamiltonian, x: np.ndarray,
                    capacity: int = DEFAULT_CAPACITY) -> sp.csr_matrix:
    """Sparse Hermitian matrix of H(x) in the computational basis."""
    x = np.asarray(x, dtype=float)
    if x.shape != (ham.m,):
        raise ValueError(f"expected x of shape ({ham.m},), got {x.shape}")
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise ValueError("x must lie in [-1, 1]^m")
    n = ham.n_sites
    if n > capacity:
        raise CapacityError(f"{n} sites exceeds capacity {capacity}")
    dim = 1 << n
    total = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for term in ham.terms:
        coeffs = term.eval_coeffs(x[list(term.param_slice)])
        for (base_c, p), c in zip(term.base_ops, coeffs):
            w = base_c * c
            if w == 0.0:
                continue
            total = total + w * pauli_matrix(p, n)
    return total


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def description_to_json(ham: ParamHamiltonian,
                        observables: Sequence[Observable]) -> str:
    """JSON description of a Hamiltonian family and its target observables."""
    doc = {
        "schema": "gslearn.hamiltonian.v1",
        "hamiltonian": ham.to_dict(),
        "observables": [o.to_dict() for o in observables],
    }
    return json.dumps(doc, sort_keys=True)
