"""Classical shadows: randomized Pauli measurements and local estimators.

Each round draws an independent uniform basis per qubit and samples the
outcome string from the exact Born distribution by sequential single-qubit
collapse (rotate, marginalize, sample, project, renormalize).  Rounds are
seeded with a counter-based Philox key per (seed, round), so records are
reproducible and rounds could be generated in parallel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lattice import Observable, PauliString

_SQ2 = 1.0 / np.sqrt(2.0)
# rotation into the measurement basis: V P V^dag = Z
_ROTATIONS = {
    0: np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=np.complex128),      # X
    1: np.array([[_SQ2, -1j * _SQ2], [_SQ2, 1j * _SQ2]], dtype=np.complex128),  # Y
    2: np.eye(2, dtype=np.complex128),                                    # Z
}
_LETTER_CODE = {"X": 0, "Y": 1, "Z": 2}
_CODE_LETTER = "XYZ"

SHADOW_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ShadowRecord:
    """T rounds of single-shot randomized Pauli measurements.

    bases: (T, n) uint8 with codes 0=X, 1=Y, 2=Z; outcomes: (T, n) int8 in
    {+1, -1}.
    """

    bases: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        if self.bases.shape != self.outcomes.shape or self.bases.ndim != 2:
            raise ValueError("bases and outcomes must share a (T, n) shape")
        if not np.isin(self.outcomes, (-1, 1)).all():
            raise ValueError("outcomes must be exactly +-1")
        if not np.isin(self.bases, (0, 1, 2)).all():
            raise ValueError("bases must be codes in {0,1,2}")

    @property
    def n_rounds(self) -> int:
        return self.bases.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.bases.shape[1]


def _round_rng(seed: int, round_index: int) -> np.random.Generator:
    key = np.array([seed, round_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _measure_round(state: np.ndarray, bases: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """One round of sequential collapse; returns bits (0/1) per qubit."""
    n = bases.shape[0]
    t = state
    bits = np.empty(n, dtype=np.int8)
    for q in range(n):
        t = t.reshape(2, -1)
        t = _ROTATIONS[bases[q]] @ t
        p0 = float(np.sum(np.abs(t[0]) ** 2))
        norm = p0 + float(np.sum(np.abs(t[1]) ** 2))
        p0 /= norm
        bit = 1 if rng.random() >= p0 else 0
        bits[q] = bit
        p = p0 if bit == 0 else 1.0 - p0
        t = t[bit] / np.sqrt(p * norm)
    return bits


def sample_shadow(state: np.ndarray, n_rounds: int, seed: int) -> ShadowRecord:
    """Collect ``n_rounds`` randomized Pauli measurements of a pure state."""
    state = np.asarray(state, dtype=np.complex128)
    if n_rounds < 1:
        raise ValueError("need at least one round")
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"state norm {norm} is not 1")
    dim = state.shape[0]
    n = dim.bit_length() - 1
    if 1 << n != dim:
        raise ValueError("state dimension must be a power of two")
    bases = np.empty((n_rounds, n), dtype=np.uint8)
    outcomes = np.empty((n_rounds, n), dtype=np.int8)
    for r in range(n_rounds):
        rng = _round_rng(seed, r)
        b = rng.integers(0, 3, size=n).astype(np.uint8)
        bits = _measure_round(state, b, rng)
        bases[r] = b
        outcomes[r] = 1 - 2 * bits.astype(np.int8)
    return ShadowRecord(bases=bases, outcomes=outcomes)


def estimate_pauli(shadow: ShadowRecord, p: PauliString) -> float:
    """Shadow estimator of tr(P rho).

    Round value is 3^|supp P| times the product of outcomes on the support
    when every support basis matches P's letters, else 0; returns the mean.
    """
    supp = list(p.support)
    if not supp:
        raise ValueError("estimator requires non-identity P")
    if max(supp) >= shadow.n_qubits:
        raise ValueError("P acts outside the measured register")
    codes = np.array([_LETTER_CODE[l] for _, l in p.factors], dtype=np.uint8)
    match = (shadow.bases[:, supp] == codes).all(axis=1)
    prod = shadow.outcomes[:, supp].prod(axis=1).astype(np.float64)
    vals = np.where(match, (3.0 ** len(supp)) * prod, 0.0)
    return float(vals.mean())


def estimate_observable(shadow: ShadowRecord, obs: Observable,
                        median_of_means: int | None = None) -> float:
    """sum_P alpha_P * estimate_pauli, linear over components.

    ``median_of_means`` splits the rounds into that many batches and takes
    the median of per-batch estimates; off (plain mean) by default.
    """
    if median_of_means is None:
        return float(sum(a * estimate_pauli(shadow, p)
                         for a, p in obs.components))
    k = int(median_of_means)
    if not 1 <= k <= shadow.n_rounds:
        raise ValueError("median_of_means must be in [1, n_rounds]")
    edges = np.linspace(0, shadow.n_rounds, k + 1, dtype=int)
    batch_vals = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sub = ShadowRecord(shadow.bases[lo:hi], shadow.outcomes[lo:hi])
        batch_vals.append(sum(a * estimate_pauli(sub, p)
                              for a, p in obs.components))
    return float(np.median(batch_vals))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def shadow_to_json(shadow: ShadowRecord) -> str:
    rounds = []
    for r in range(shadow.n_rounds):
        rounds.append([
            "".join(_CODE_LETTER[c] for c in shadow.bases[r]),
            "".join("+" if o > 0 else "-" for o in shadow.outcomes[r]),
        ])
    return json.dumps({"version": SHADOW_FORMAT_VERSION, "rounds": rounds},
                      sort_keys=True)


def shadow_from_json(text: str) -> ShadowRecord:
    doc = json.loads(text)
    if doc.get("version") != SHADOW_FORMAT_VERSION:
        raise ValueError(f"unsupported shadow format {doc.get('version')!r}")
    bases = np.array([[_LETTER_CODE[c] for c in b] for b, _ in doc["rounds"]],
                     dtype=np.uint8)
    outcomes = np.array([[1 if c == "+" else -1 for c in o]
                         for _, o in doc["rounds"]], dtype=np.int8)
    return ShadowRecord(bases=bases, outcomes=outcomes)


def save_shadows_npz(path, shadows: list[ShadowRecord]) -> None:
    """Compact binary container: one (bases, outcomes) pair per record."""
    arrays = {"version": np.array([SHADOW_FORMAT_VERSION])}
    for i, s in enumerate(shadows):
        arrays[f"bases_{i}"] = s.bases
        arrays[f"outcomes_{i}"] = s.outcomes
    np.savez_compressed(path, **arrays)


def load_shadows_npz(path) -> list[ShadowRecord]:
    with np.load(path) as z:
        if int(z["version"][0]) != SHADOW_FORMAT_VERSION:
            raise ValueError("unsupported shadow format")
        out = []
        i = 0
        while f"bases_{i}" in z:
            out.append(ShadowRecord(bases=z[f"bases_{i}"],
                                    outcomes=z[f"outcomes_{i}"]))
            i += 1
    return out
