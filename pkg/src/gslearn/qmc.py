"""Low-discrepancy points, discrepancy measurement, and QMC diagnostics.

Base-2 Sobol points are generated from a frozen direction-number table
(first 64 dimensions of the published Joe-Kuo table, shipped as package
data), in natural index order with the all-zeros index-0 point skipped by
default.  Star-discrepancy is exact for d <= 2 (sweep over the critical
boxes anchored at data coordinates) and a certified [lower, upper] bracket
for d >= 3.  The Hardy-Krause bound is the recursive variation estimate
(cell-wise mixed differences plus the bound of every upper-boundary
restriction), which combines with the discrepancy into the quadrature-error
check used by the diagnostics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .errors import CapacityError, DensityError

_SOBOL_BITS = 32
_SCALE = float(2**_SOBOL_BITS)


@dataclass(frozen=True)
class PointSet:
    """N points in [0,1)^d with provenance and seed/skip metadata."""

    points: np.ndarray
    provenance: str
    seed: int | None = None
    skip: int = 0

    def __post_init__(self):
        pts = self.points
        if pts.ndim != 2:
            raise ValueError("points must be a (N, d) array")
        if pts.size and (pts.min() < 0.0 or pts.max() >= 1.0):
            raise ValueError("coordinates must lie in [0, 1)")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def save_csv(self, path) -> None:
        np.savetxt(path, self.points, delimiter=",",
                   header=f"provenance={self.provenance} seed={self.seed} "
                          f"skip={self.skip}")

    @staticmethod
    def load_csv(path, provenance: str = "imported") -> "PointSet":
        pts = np.atleast_2d(np.loadtxt(path, delimiter=","))
        return PointSet(pts, provenance)


# ---------------------------------------------------------------------------
# Sobol sequence
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def _direction_table() -> dict:
    text = (resources.files("gslearn") / "data/sobol_direction_numbers.json"
            ).read_text()
    return json.loads(text)


@lru_cache(maxsize=32)
def _direction_integers(d: int) -> np.ndarray:
    """V[dim, k] as uint64 (already shifted to bit position 32-k-1)."""
    table = _direction_table()
    if d > table["dimensions"]:
        raise CapacityError(
            f"direction-number table covers {table['dimensions']} "
            f"dimensions, requested {d}")
    v = np.zeros((d, _SOBOL_BITS), dtype=np.uint64)
    for dim in range(d):
        if dim == 0:
            for k in range(_SOBOL_BITS):
                v[0, k] = np.uint64(1) << np.uint64(_SOBOL_BITS - 1 - k)
            continue
        poly = table["poly"][dim]
        m_init = table["vinit"][dim]
        s = max(poly.bit_length() - 1, 1)
        # inner coefficients a_1..a_{s-1} of the primitive polynomial
        a = [(poly >> (s - i)) & 1 for i in range(1, s)]
        for k in range(min(s, _SOBOL_BITS)):
            v[dim, k] = np.uint64(m_init[k]) << np.uint64(
                _SOBOL_BITS - 1 - k)
        for k in range(s, _SOBOL_BITS):
            acc = v[dim, k - s] ^ (v[dim, k - s] >> np.uint64(s))
            for i in range(1, s):
                if a[i - 1]:
                    acc ^= v[dim, k - i]
            v[dim, k] = acc
    return v


def sobol_points(n: int, d: int, skip_zero: bool = True) -> PointSet:
    """First ``n`` base-2 Sobol points in natural index order.

    With ``skip_zero`` (the default) the all-zeros point at index 0 is
    skipped, so the first returned point in d=1 is 0.5.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    v = _direction_integers(d)
    start = 1 if skip_zero else 0
    idx = np.arange(start, start + n, dtype=np.uint64)
    if int(idx[-1]) >= 1 << _SOBOL_BITS:
        raise CapacityError("sequence index exceeds 32-bit capacity")
    x = np.zeros((n, d), dtype=np.uint64)
    for bit in range(_SOBOL_BITS):
        mask = ((idx >> np.uint64(bit)) & np.uint64(1)).astype(bool)
        if not mask.any():
            continue
        x[mask] ^= v[:, bit][None, :]
    pts = x.astype(np.float64) / _SCALE
    return PointSet(pts, "sobol", skip=start)


def uniform_points(n: int, d: int, seed: int) -> PointSet:
    """Seeded i.i.d. uniform draws on [0,1)^d."""
    rng = np.random.default_rng(seed)
    return PointSet(rng.random((n, d)), "uniform-random", seed=seed)


# ---------------------------------------------------------------------------
# Star-discrepancy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscrepancyResult:
    lower: float
    upper: float
    exact: bool

    @property
    def value(self) -> float:
        if not self.exact:
            raise ValueError("only a bracket is available; use lower/upper")
        return self.upper


def _star_discrepancy_1d(x: np.ndarray) -> float:
    n = len(x)
    xs = np.sort(x)
    i = np.arange(1, n + 1)
    return float(np.maximum(i / n - xs, xs - (i - 1) / n).max())


def _star_discrepancy_2d(pts: np.ndarray) -> float:
    """Exact sup over boxes [0,a) x [0,b) via the critical-corner sweep.

    For each candidate corner (from data coordinates plus {0, 1}) the
    supremum contributions are count_closed/N - a*b (approached from just
    above the data values) and a*b - count_strict/N (at the candidate).
    """
    n = pts.shape[0]
    order = np.argsort(pts[:, 0], kind="stable")
    x = pts[order, 0]
    y = pts[order, 1]
    a_cands = np.unique(np.concatenate((x, [0.0, 1.0])))
    b_cands = np.unique(np.concatenate((y, [0.0, 1.0])))
    best = 0.0
    for a in a_cands:
        n_strict = int(np.searchsorted(x, a, side="left"))
        n_closed = int(np.searchsorted(x, a, side="right"))
        ys_strict = np.sort(y[:n_strict])
        ys_closed = np.sort(y[:n_closed]) if n_closed != n_strict \
            else ys_strict
        vol = a * b_cands
        cnt_strict = np.searchsorted(ys_strict, b_cands, side="left")
        cnt_closed = np.searchsorted(ys_closed, b_cands, side="right")
        neg = (vol - cnt_strict / n).max()
        pos = (cnt_closed / n - vol).max()
        best = max(best, neg, pos)
    return float(best)


def _bracket_nd(pts: np.ndarray, resolution: int) -> tuple[float, float]:
    """Certified bracket for d >= 3 on a uniform coordinate grid."""
    n, d = pts.shape
    r = resolution
    hist, _ = np.histogramdd(pts, bins=[np.linspace(0.0, 1.0, r + 1)] * d)
    # cum[g] = #points with x_i < g/r in every coordinate, g in {0..r}^d
    cum = np.zeros([r + 1] * d)
    block = hist
    for ax in range(d):
        block = np.cumsum(block, axis=ax)
    cum[(slice(1, None),) * d] = block
    grid = np.linspace(0.0, 1.0, r + 1)
    vol = grid
    for _ax in range(d - 1):
        vol = np.multiply.outer(vol, grid)
    s = cum / n
    # lower bound: true |R| at the grid corners (data counted strictly below)
    lower = float(np.abs(s - vol).max())
    # upper bound: between corners, count and volume move at most one cell
    lo_corner = (slice(0, r),) * d
    hi_corner = (slice(1, r + 1),) * d
    upper = float(max((s[hi_corner] - vol[lo_corner]).max(),
                      (vol[hi_corner] - s[lo_corner]).max()))
    return lower, max(lower, upper)


def star_discrepancy(points: PointSet | np.ndarray,
                     resolution: int = 24) -> DiscrepancyResult:
    """Exact star-discrepancy for d <= 2, a certified bracket for d >= 3."""
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(points)
    if pts.shape[0] < 1:
        raise ValueError("need at least one point")
    d = pts.shape[1]
    if d == 1:
        val = _star_discrepancy_1d(pts[:, 0])
        return DiscrepancyResult(val, val, exact=True)
    if d == 2:
        val = _star_discrepancy_2d(pts)
        return DiscrepancyResult(val, val, exact=True)
    lo, hi = _bracket_nd(pts, resolution)
    return DiscrepancyResult(lo, hi, exact=False)


def sobol_constant(d: int) -> float:
    """The discrepancy-bound constant C(d) < (1/d!) (d / log(2d))."""
    return (1.0 / math.factorial(d)) * (d / math.log(2 * d))


def random_points_bound(n: int, d: int, delta: float) -> float:
    """The probabilistic bound 5.7 sqrt(4.9 + log(1/delta)) sqrt(d/N)."""
    return 5.7 * math.sqrt(4.9 + math.log(1.0 / delta)) * math.sqrt(d / n)


# ---------------------------------------------------------------------------
# Hardy-Krause variation (recursive upper bound)
# ---------------------------------------------------------------------------


def _vitali(f: Callable, free: tuple[int, ...], d: int,
            resolution: int) -> float:
    """Cell-summed |mixed difference| of f over the free coordinates.

    The alternating corner sum over a cell is the central-difference
    estimate of the mixed partial at the cell center times the cell volume,
    so the sum approximates the integral of |d^k f / dx_free|.
    """
    grid = np.linspace(0.0, 1.0, resolution + 1)
    mesh = np.meshgrid(*([grid] * len(free)), indexing="ij")
    shape = mesh[0].shape if free else ()
    pts = np.ones(shape + (d,))
    for ax, coord in enumerate(free):
        pts[..., coord] = mesh[ax]
    vals = np.asarray(f(pts), dtype=float)
    if vals.shape != shape:
        raise ValueError("function must map (..., d) arrays to (...) values")
    for ax in range(len(free)):
        vals = np.diff(vals, axis=ax)
    if not np.isfinite(vals).all():
        raise ValueError("non-finite derivative estimates")
    return float(np.abs(vals).sum())


def hk_variation_upper(f: Callable, d: int, resolution: int = 64) -> float:
    """Recursive variation bound: Vitali term plus every x_i = 1 restriction.

    ``f`` must accept an (..., d) array of points in [0,1]^d and return the
    (...)-shaped values.  Cost grows as 2^d recursions over the grid; d <= 4.
    """
    if d < 1 or d > 4:
        raise ValueError("implemented for 1 <= d <= 4")

    memo: dict[tuple[int, ...], float] = {}

    def rec(free: tuple[int, ...]) -> float:
        if not free:
            return 0.0
        if free in memo:
            return memo[free]
        total = _vitali(f, free, d, resolution)
        for i in free:
            total += rec(tuple(c for c in free if c != i))
        memo[free] = total
        return total

    return rec(tuple(range(d)))


# ---------------------------------------------------------------------------
# Koksma-Hlawka diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KoksmaHlawkaReport:
    qmc_error: float
    variation: float
    dstar_upper: float
    bound: float
    holds: bool


def tensor_quadrature(f: Callable, d: int, nodes: int = 32) -> float:
    """Gauss-Legendre tensor-product integral of f over [0,1]^d (d <= 3)."""
    if d > 3:
        raise ValueError("dense quadrature implemented for d <= 3")
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    mesh = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([m for m in mesh], axis=-1)
    vals = np.asarray(f(pts), dtype=float)
    weight = w
    for _ in range(d - 1):
        weight = np.multiply.outer(weight, w)
    return float((vals * weight).sum())


def koksma_hlawka_check(f: Callable, points: PointSet,
                        true_integral: float | None = None,
                        hk_resolution: int = 64,
                        bracket_resolution: int = 24) -> KoksmaHlawkaReport:
    """Compare |integral - sample mean| against V_HK(f) * D*_N.

    ``holds`` uses the upper end of the discrepancy bracket and a 1e-9
    relative slack.
    """
    d = points.d
    if true_integral is None:
        true_integral = tensor_quadrature(f, d)
    sample_mean = float(np.mean(np.asarray(f(points.points), dtype=float)))
    err = abs(true_integral - sample_mean)
    vhk = hk_variation_upper(f, d, resolution=hk_resolution)
    dres = star_discrepancy(points, resolution=bracket_resolution)
    bound = vhk * dres.upper
    return KoksmaHlawkaReport(qmc_error=err, variation=vhk,
                              dstar_upper=dres.upper, bound=bound,
                              holds=err <= bound * (1.0 + 1e-9))


# ---------------------------------------------------------------------------
# Product densities and the inverse (Rosenblatt) transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityComponent:
    """A 1-D density on [0,1] with its CDF and (optionally exact) inverse."""

    pdf: Callable
    cdf: Callable
    ppf: Callable | None = None
    name: str = "custom"

    def inverse(self, u: np.ndarray) -> np.ndarray:
        if self.ppf is not None:
            return np.asarray(self.ppf(u), dtype=float)
        out = np.empty_like(u)
        for i, ui in np.ndenumerate(u):
            if ui <= 0.0:
                out[i] = 0.0
            elif ui >= 1.0:
                out[i] = 1.0
            else:
                out[i] = brentq(lambda t: self.cdf(t) - ui, 0.0, 1.0,
                                xtol=1e-10)
        return out


def _uniform_component() -> DensityComponent:
    return DensityComponent(pdf=lambda x: np.ones_like(np.asarray(x, float)),
                            cdf=lambda x: np.asarray(x, float),
                            ppf=lambda u: np.asarray(u, float),
                            name="uniform")


def _linear_component(slope: float = 1.0) -> DensityComponent:
    """g(x) = 1 + slope (2x - 1) on [0,1]; slope=1 gives g(x) = 2x."""
    a = float(slope)
    if not -1.0 <= a <= 1.0:
        raise DensityError("linear slope must lie in [-1, 1]")

    def pdf(x):
        return 1.0 + a * (2.0 * np.asarray(x, float) - 1.0)

    def cdf(x):
        x = np.asarray(x, float)
        return x + a * (x**2 - x)

    def ppf(u):
        u = np.asarray(u, float)
        if a == 0.0:
            return u
        disc = (1.0 - a) ** 2 + 4.0 * a * u
        return (-(1.0 - a) + np.sqrt(disc)) / (2.0 * a)

    return DensityComponent(pdf, cdf, ppf, name="linear")


def _truncnorm_component(mu: float = 0.5, sigma: float = 0.25
                         ) -> DensityComponent:
    if sigma <= 0:
        raise DensityError("sigma must be > 0")
    lo = ndtr((0.0 - mu) / sigma)
    hi = ndtr((1.0 - mu) / sigma)
    z = hi - lo

    def pdf(x):
        x = np.asarray(x, float)
        return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (
            sigma * np.sqrt(2 * np.pi) * z)

    def cdf(x):
        x = np.asarray(x, float)
        return (ndtr((x - mu) / sigma) - lo) / z

    def ppf(u):
        u = np.asarray(u, float)
        return mu + sigma * ndtri(lo + u * z)

    return DensityComponent(pdf, cdf, ppf, name="truncated-gaussian")


def tabulated_component(grid: np.ndarray, values: np.ndarray
                        ) -> DensityComponent:
    """Density from tabulated pdf values; CDF by trapezoid, inverse by Brent.

    Validates normalization to 1e-8 and strict positivity on the grid.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
        raise DensityError("grid and values must be matching 1-D arrays")
    if grid[0] != 0.0 or grid[-1] != 1.0 or np.any(np.diff(grid) <= 0):
        raise DensityError("grid must increase from 0 to 1")
    if values.min() <= 0.0:
        raise DensityError("tabulated density must be strictly positive")
    total = float(np.trapezoid(values, grid))
    if abs(total - 1.0) > 1e-8:
        raise DensityError(f"density integrates to {total}, not 1")
    cdf_vals = np.concatenate(([0.0],
                               cumulative_trapezoid(values, grid)))
    cdf_vals = cdf_vals / cdf_vals[-1]
    if np.any(np.diff(cdf_vals) <= 0.0):
        raise DensityError("tabulated CDF is not strictly monotone")

    def pdf(x):
        return np.interp(np.asarray(x, float), grid, values)

    def cdf(x):
        return np.interp(np.asarray(x, float), grid, cdf_vals)

    def ppf(u):
        u = np.asarray(u, float)
        x0 = np.interp(u, cdf_vals, grid)
        out = np.empty_like(x0)
        flat_u = u.ravel()
        flat_x = x0.ravel()
        res = out.ravel()
        for i in range(flat_u.size):
            ui = flat_u[i]
            if ui <= 0.0:
                res[i] = 0.0
            elif ui >= 1.0:
                res[i] = 1.0
            else:
                res[i] = brentq(lambda t: np.interp(t, grid, cdf_vals) - ui,
                                0.0, 1.0, xtol=1e-10)
        return out

    return DensityComponent(pdf, cdf, ppf, name="tabulated")


_FAMILIES = {
    "uniform": lambda spec: _uniform_component(),
    "linear": lambda spec: _linear_component(spec.get("slope", 1.0)),
    "truncated-gaussian": lambda spec: _truncnorm_component(
        spec.get("mu", 0.5), spec.get("sigma", 0.25)),
}


@dataclass(frozen=True)
class ProductDensity:
    """Coordinate-wise product density g(x) = prod_j g_j(x_j) on [0,1]^d."""

    components: tuple[DensityComponent, ...]

    @property
    def d(self) -> int:
        return len(self.components)

    @staticmethod
    def iid(component: DensityComponent, d: int) -> "ProductDensity":
        return ProductDensity(tuple([component] * d))

    @staticmethod
    def from_spec(spec, d: int | None = None) -> "ProductDensity":
        """Build from harness JSON: a dict (broadcast) or list of dicts.

        Each entry names a family ("uniform" | "linear" |
        "truncated-gaussian") with its parameters.
        """
        if isinstance(spec, dict):
            if d is None:
                raise DensityError("broadcasting a single family needs d")
            spec = [spec] * d
        comps = []
        for entry in spec:
            family = entry.get("family")
            if family not in _FAMILIES:
                raise DensityError(f"unknown density family {family!r}")
            comps.append(_FAMILIES[family](entry))
        if d is not None and len(comps) != d:
            raise DensityError(f"expected {d} components, got {len(comps)}")
        return ProductDensity(tuple(comps))


def inverse_transform(points: PointSet, density: ProductDensity) -> PointSet:
    """Map uniform points through the coordinate-wise inverse CDFs.

    For product densities the Rosenblatt transform factorizes, so each
    coordinate inverts independently.  Point count and order are preserved.
    """
    if density.d != points.d:
        raise DensityError(
            f"density has {density.d} coordinates, points have {points.d}")
    cols = []
    for j, comp in enumerate(density.components):
        cols.append(comp.inverse(points.points[:, j]))
    pts = np.clip(np.stack(cols, axis=1), 0.0, np.nextafter(1.0, 0.0))
    return PointSet(pts, "transformed", seed=points.seed, skip=points.skip)
