"""Geometric feature maps over the discretized parameter space.

For each geometrically local Pauli P, the coordinates in I_P are snapped to
a grid with spacing delta2 (grid values {0, +-delta2, ..., +-1}); the cell
around each grid point is half-open, (-delta2/2, delta2/2] per coordinate,
so every x lands in exactly one cell per Pauli.  Feature vectors carry one
entry per Pauli block: an indicator for the plain map, and
sign(alpha_P) * sqrt(|alpha_P|) times the indicator for the
observable-weighted map used by ridge regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FeatureBlowupError
from .lattice import Observable, ParamHamiltonian, PauliString, local_coordinates

DEFAULT_CELL_CAP = 10**6


@dataclass(frozen=True)
class HyperParams:
    """Discretization and regularization knobs.

    delta2 must be the reciprocal of a positive integer so that +-1 are grid
    points.  The norm budgets B (l1, baseline) and Lambda (l2, ridge) are
    carried for bookkeeping; the fitted models record the achieved norms.
    """

    delta1: float
    delta2: float
    eps1: float | None = None
    b_l1: float | None = None
    lambda_l2: float | None = None

    def __post_init__(self):
        if self.delta1 < 0:
            raise ValueError("delta1 must be >= 0")
        k = round(1.0 / self.delta2)
        if k < 1 or abs(k * self.delta2 - 1.0) > 1e-9:
            raise ValueError("1/delta2 must be a positive integer")

    @property
    def grid_halfcount(self) -> int:
        """K with delta2 = 1/K; grid values are j*delta2 for j in [-K, K]."""
        return round(1.0 / self.delta2)


def delta2_default(eps1: float, ip_size: int, cprime: float = 1.0) -> float:
    """Grid spacing 1 / ceil(2 sqrt(C' |I_P|) / eps1), clamped so delta2 <= 1.

    The degenerate |I_P| = 0 case returns 1 (the ceiling is clamped to 1).
    """
    if not 0 < eps1 < 1 / math.e:
        raise ValueError("eps1 must lie in (0, 1/e)")
    if ip_size < 0 or cprime <= 0:
        raise ValueError("ip_size >= 0 and cprime > 0 required")
    denom = max(1, math.ceil(2.0 * math.sqrt(cprime * ip_size) / eps1))
    return 1.0 / denom


def _cell_offset(xc: float, delta2: float) -> int:
    """The unique j with xc - j*delta2 in (-delta2/2, delta2/2]."""
    j = math.ceil(xc / delta2 - 0.5)
    # guard against float roundoff at the half-open boundary
    diff = xc - j * delta2
    half = delta2 / 2.0
    if diff > half:
        j += 1
    elif diff <= -half:
        j -= 1
    return j


def lattice_points(i_p: Sequence[int], delta2: float, m: int,
                   cap: int = DEFAULT_CELL_CAP) -> np.ndarray:
    """The grid X_P as full m-dimensional vectors (zeros outside I_P).

    |X_P| = (2/delta2 + 1)^|I_P|; an empty I_P yields the single all-zeros
    point.
    """
    k = round(1.0 / delta2)
    if abs(k * delta2 - 1.0) > 1e-9 or k < 1:
        raise ValueError("1/delta2 must be a positive integer")
    n_vals = 2 * k + 1
    size = n_vals ** len(i_p)
    if size > cap:
        raise FeatureBlowupError(
            f"|X_P| = {n_vals}^{len(i_p)} exceeds the cell cap {cap}; "
            "decrease delta1 or increase delta2")
    pts = np.zeros((size, m))
    vals = np.arange(-k, k + 1) * delta2
    for pos, c in enumerate(i_p):
        reps = n_vals ** (len(i_p) - 1 - pos)
        tile = size // (reps * n_vals)
        pts[:, c] = np.tile(np.repeat(vals, reps), tile)
    return pts


def locate_cell(x: np.ndarray, i_p: Sequence[int], delta2: float) -> np.ndarray:
    """The unique x' in X_P whose cell T_{x',P} contains x."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c in i_p:
        out[c] = _cell_offset(float(x[c]), delta2) * delta2
    return out


@dataclass(frozen=True)
class FeatureVector:
    """One nonzero entry per Pauli block of the feature space.

    ``indices[b]`` is the global feature index of the active cell in block
    b and ``values[b]`` its entry (1 for the indicator map; possibly 0 for
    the weighted map when alpha_P = 0).
    """

    dimension: int
    indices: np.ndarray
    values: np.ndarray

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        np.add.at(out, self.indices, self.values)
        return out

    def dot(self, other: "FeatureVector") -> float:
        if self.dimension != other.dimension:
            raise ValueError("feature dimension mismatch")
        same = self.indices == other.indices
        return float(np.sum(self.values * other.values * same))

    @property
    def l0(self) -> int:
        return int(np.count_nonzero(self.values))

    @property
    def l1(self) -> float:
        return float(np.sum(np.abs(self.values)))

    @property
    def l2_sq(self) -> float:
        return float(np.sum(self.values**2))


class FeatureSpace:
    """Deterministic indexing of (Pauli, cell) pairs for a fixed geometry.

    Blocks follow the order of ``geo``; within a block, cells are indexed in
    mixed radix over the I_P coordinates in increasing coordinate order.
    """

    def __init__(self, ham: ParamHamiltonian, geo: Sequence[PauliString],
                 hp: HyperParams, cell_cap: int = DEFAULT_CELL_CAP):
        self.ham = ham
        self.geo = tuple(geo)
        self.hp = hp
        self.delta2 = 1.0 / hp.grid_halfcount
        self.k = hp.grid_halfcount
        self.i_p = tuple(local_coordinates(p, ham, hp.delta1) for p in self.geo)
        n_vals = 2 * self.k + 1
        sizes = []
        for ip in self.i_p:
            size = n_vals ** len(ip)
            if size > cell_cap:
                raise FeatureBlowupError(
                    f"|X_P| = {n_vals}^{len(ip)} exceeds the cell cap "
                    f"{cell_cap}; decrease delta1 or increase delta2")
            sizes.append(size)
        self.block_sizes = np.array(sizes, dtype=np.int64)
        self.block_offsets = np.concatenate(
            ([0], np.cumsum(self.block_sizes[:-1])))
        self.dimension = int(self.block_sizes.sum())

    @property
    def n_blocks(self) -> int:
        return len(self.geo)

    def cell_indices(self, x: np.ndarray) -> np.ndarray:
        """Global feature index of the active cell in every block."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.ham.m,):
            raise ValueError(f"expected x of shape ({self.ham.m},)")
        n_vals = 2 * self.k + 1
        out = np.empty(self.n_blocks, dtype=np.int64)
        for b, ip in enumerate(self.i_p):
            idx = 0
            for c in ip:
                j = _cell_offset(float(x[c]), self.delta2)
                idx = idx * n_vals + (j + self.k)
            out[b] = self.block_offsets[b] + idx
        return out

    def block_values(self, obs: Observable | None) -> np.ndarray:
        """Per-block entry values: 1, or sign(alpha_P) sqrt(|alpha_P|)."""
        if obs is None:
            return np.ones(self.n_blocks)
        alpha = {p: a for a, p in obs.components}
        vals = np.empty(self.n_blocks)
        for b, p in enumerate(self.geo):
            a = alpha.get(p, 0.0)
            vals[b] = np.sign(a) * np.sqrt(abs(a))
        return vals


def phi(x: np.ndarray, space: FeatureSpace) -> FeatureVector:
    """Indicator feature map: one 1 per Pauli block (LASSO baseline)."""
    return FeatureVector(space.dimension, space.cell_indices(x),
                         np.ones(space.n_blocks))


def phi_tilde(x: np.ndarray, obs: Observable,
              space: FeatureSpace) -> FeatureVector:
    """Observable-weighted map; ||phi_tilde(x)||_2^2 = sum_P |alpha_P|."""
    return FeatureVector(space.dimension, space.cell_indices(x),
                         space.block_values(obs))


# ---------------------------------------------------------------------------
# Batched extraction and export
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureBatch:
    """Features of N points: cell indices (N, n_blocks) + shared block values.

    Block values do not depend on x, so a batch is fully described by which
    cell fires per block.
    """

    dimension: int
    indices: np.ndarray
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    def row(self, i: int) -> FeatureVector:
        return FeatureVector(self.dimension, self.indices[i], self.values)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.dimension))
        for i in range(self.n):
            np.add.at(out[i], self.indices[i], self.values)
        return out


def feature_batch(xs: np.ndarray, space: FeatureSpace,
                  obs: Observable | None = None) -> FeatureBatch:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    idx = np.stack([space.cell_indices(x) for x in xs])
    return FeatureBatch(space.dimension, idx, space.block_values(obs))


def export_features(batch: FeatureBatch, path, fmt: str = "csv") -> None:
    """Columnar dump of a feature batch for offline inspection."""
    if fmt == "csv":
        with open(path, "w") as f:
            f.write("row,block,feature_index,value\n")
            for i in range(batch.n):
                for b in range(batch.indices.shape[1]):
                    f.write(f"{i},{b},{batch.indices[i, b]},"
                            f"{batch.values[b]!r}\n")
    elif fmt == "npz":
        np.savez_compressed(path, dimension=np.array([batch.dimension]),
                            indices=batch.indices, values=batch.values)
    else:
        raise ValueError(f"unknown export format {fmt!r}")
