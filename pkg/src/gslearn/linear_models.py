"""Ridge and l1-regularized regression over the geometric feature maps.

Both fitters minimize the penalized form

    (1/N) sum_l (w . f(x_l) - y_l)^2 + penalty(w)

with penalty lambda*||w||_2^2 (ridge) or mu*||w||_1 (LASSO).  The norm
constraints of the constrained formulations are not imposed; the achieved
norms are recorded on the fitted model so the hypotheses can be checked
post hoc.

Ridge is solved through the kernel dual alpha = (K + N lambda I)^{-1} y with
K the Gram matrix of feature vectors, exploiting the one-nonzero-per-block
structure: K(x, x') = sum_P v_P^2 * 1{same cell for P}.  LASSO runs block
coordinate descent; cells within a block are disjoint indicators, so a whole
block updates at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ConvergenceError
from .featuremap import FeatureBatch, FeatureVector

MODEL_FORMAT_VERSION = 1


@dataclass
class LinearModel:
    kind: str                      # "ridge" | "lasso"
    dimension: int
    weights: dict[int, float]
    regularization: float
    norms: tuple[float, float]     # (||w||_1, ||w||_2)
    # kernel-dual data (ridge only): training features + dual coefficients
    dual_coef: np.ndarray | None = None
    train_indices: np.ndarray | None = None
    train_values: np.ndarray | None = None

    def weight_at(self, index: int) -> float:
        return self.weights.get(int(index), 0.0)


def _soft(z, thresh):
    return np.sign(z) * np.maximum(np.abs(z) - thresh, 0.0)


def _check_labels(batch, y):
    y = np.asarray(y, dtype=float)
    n = batch.n if isinstance(batch, FeatureBatch) else batch.shape[0]
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    if n < 1:
        raise ValueError("need at least one sample")
    return y


def _recorded_norms(weights: dict[int, float]) -> tuple[float, float]:
    vals = np.fromiter(weights.values(), dtype=float, count=len(weights))
    return (float(np.abs(vals).sum()), float(np.sqrt((vals**2).sum())))


# ---------------------------------------------------------------------------
# Gram / kernel helpers
# ---------------------------------------------------------------------------


def gram_matrix(batch: FeatureBatch) -> np.ndarray:
    """K[a, b] = f(x_a) . f(x_b) via the per-block cell-match shortcut."""
    n = batch.n
    k = np.zeros((n, n))
    for b in range(batch.indices.shape[1]):
        v2 = batch.values[b] ** 2
        if v2 == 0.0:
            continue
        col = batch.indices[:, b]
        k += v2 * (col[:, None] == col[None, :])
    return k


def kernel_cross(batch: FeatureBatch, other_indices: np.ndarray) -> np.ndarray:
    """K[a, t] between training rows and new rows (given their indices)."""
    other_indices = np.atleast_2d(other_indices)
    n, t = batch.n, other_indices.shape[0]
    k = np.zeros((n, t))
    for b in range(batch.indices.shape[1]):
        v2 = batch.values[b] ** 2
        if v2 == 0.0:
            continue
        k += v2 * (batch.indices[:, b][:, None] == other_indices[:, b][None, :])
    return k


def _accumulate_primal(indices: np.ndarray, values: np.ndarray,
                       coef: np.ndarray) -> dict[int, float]:
    """w = sum_l coef_l f(x_l) as a sparse map, dropping exact zeros."""
    flat_idx = indices.ravel()
    flat_val = (coef[:, None] * values[None, :]).ravel()
    uniq, inv = np.unique(flat_idx, return_inverse=True)
    sums = np.bincount(inv, weights=flat_val)
    return {int(i): float(s) for i, s in zip(uniq, sums) if s != 0.0}


# ---------------------------------------------------------------------------
# Ridge
# ---------------------------------------------------------------------------


def ridge_fit(features, labels, lam: float | None = None,
              cv_folds: int = 5, cv_grid: Sequence[float] | None = None,
              seed: int = 0) -> LinearModel:
    """Kernel ridge regression; lam=None selects it by k-fold CV.

    Accepts a :class:`FeatureBatch` or a dense (N, D) array.  The penalized
    objective is (1/N)||Xw - y||^2 + lam*||w||^2, whose dual solve is
    (K + N lam I) alpha = y.
    """
    y = _check_labels(features, labels)
    if lam is None:
        grid = cv_grid if cv_grid is not None else np.logspace(-6, 1, 15)
        lam = _cross_validate(lambda f, t, lv: ridge_fit(f, t, lv),
                              features, y, grid, cv_folds, seed)
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    n = y.shape[0]
    if isinstance(features, FeatureBatch):
        k = gram_matrix(features)
    else:
        x = np.asarray(features, dtype=float)
        k = x @ x.T
    try:
        cho = scipy.linalg.cho_factor(k + n * lam * np.eye(n), lower=True)
        alpha = scipy.linalg.cho_solve(cho, y)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover
        raise ConvergenceError("ridge dual solve failed",
                               details={"lambda": lam}) from exc
    if isinstance(features, FeatureBatch):
        weights = _accumulate_primal(features.indices, features.values, alpha)
        model = LinearModel("ridge", features.dimension, weights, lam,
                            _recorded_norms(weights), dual_coef=alpha,
                            train_indices=features.indices.copy(),
                            train_values=features.values.copy())
    else:
        w = x.T @ alpha
        weights = {int(i): float(v) for i, v in enumerate(w) if v != 0.0}
        model = LinearModel("ridge", x.shape[1], weights, lam,
                            _recorded_norms(weights))
    return model


def ridge_gradient_norm(features, labels, model: LinearModel) -> float:
    """Norm of the penalized-objective gradient at the fitted weights."""
    y = np.asarray(labels, dtype=float)
    lam = model.regularization
    if isinstance(features, FeatureBatch):
        preds = predict_batch(model, features)
        r = y - preds
        n = features.n
        parts = []
        for b in range(features.indices.shape[1]):
            col = features.indices[:, b]
            v = features.values[b]
            cells, inv = np.unique(col, return_inverse=True)
            xtr = v * np.bincount(inv, weights=r)
            wvals = np.array([model.weight_at(c) for c in cells])
            parts.append(-(2.0 / n) * xtr + 2.0 * lam * wvals)
        # weights on cells never observed have zero data-gradient but
        # contribute 2*lam*w; the dual solution leaves them at zero.
        return float(np.linalg.norm(np.concatenate(parts)))
    x = np.asarray(features, dtype=float)
    w = np.zeros(model.dimension)
    for i, v in model.weights.items():
        w[i] = v
    r = y - x @ w
    grad = -(2.0 / x.shape[0]) * (x.T @ r) + 2.0 * lam * w
    return float(np.linalg.norm(grad))


# ---------------------------------------------------------------------------
# LASSO
# ---------------------------------------------------------------------------


def lasso_fit(features, labels, mu: float | None = None,
              max_iter: int = 20000, tol: float = 1e-8,
              cv_folds: int = 5, cv_grid: Sequence[float] | None = None,
              seed: int = 0) -> LinearModel:
    """Coordinate-descent LASSO on (1/N)||Xw - y||^2 + mu*||w||_1.

    Converged when the largest coordinate update in a sweep is below
    ``tol``; otherwise raises :class:`ConvergenceError` carrying the duality
    gap reached.
    """
    y = _check_labels(features, labels)
    if mu is None:
        grid = cv_grid if cv_grid is not None else np.logspace(-6, 1, 15)
        mu = _cross_validate(lambda f, t, mv: lasso_fit(f, t, mv),
                             features, y, grid, cv_folds, seed)
    if mu <= 0:
        raise ValueError("mu must be > 0")
    if isinstance(features, FeatureBatch):
        return _lasso_blocks(features, y, mu, max_iter, tol)
    return _lasso_dense(np.asarray(features, dtype=float), y, mu,
                        max_iter, tol)


def _lasso_blocks(batch: FeatureBatch, y, mu, max_iter, tol) -> LinearModel:
    n, n_blocks = batch.indices.shape
    thresh = n * mu / 2.0
    blocks = []
    for b in range(n_blocks):
        v = float(batch.values[b])
        if v == 0.0:
            continue
        cells, inv = np.unique(batch.indices[:, b], return_inverse=True)
        counts = np.bincount(inv).astype(float)
        blocks.append((v, cells, inv, counts, np.zeros(len(cells))))
    r = y.astype(float).copy()
    converged = False
    for _ in range(max_iter):
        max_delta = 0.0
        for v, cells, inv, counts, w in blocks:
            r += v * w[inv]
            rho = v * np.bincount(inv, weights=r)
            w_new = _soft(rho, thresh) / (v * v * counts)
            delta = np.abs(w_new - w).max()
            if delta > max_delta:
                max_delta = delta
            w[:] = w_new
            r -= v * w[inv]
        if max_delta < tol:
            converged = True
            break
    weights: dict[int, float] = {}
    for v, cells, inv, counts, w in blocks:
        for c, wv in zip(cells, w):
            if wv != 0.0:
                weights[int(c)] = weights.get(int(c), 0.0) + float(wv)
    model = LinearModel("lasso", batch.dimension, weights, mu,
                        _recorded_norms(weights))
    if not converged:
        gap = _lasso_duality_gap(batch, y, model, mu)
        raise ConvergenceError(
            f"LASSO did not converge in {max_iter} sweeps",
            details={"duality_gap": gap, "mu": mu})
    return model


def _lasso_dense(x, y, mu, max_iter, tol) -> LinearModel:
    n, d = x.shape
    thresh = n * mu / 2.0
    col_sq = (x**2).sum(axis=0)
    w = np.zeros(d)
    r = y.astype(float).copy()
    converged = False
    for _ in range(max_iter):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            r += x[:, j] * w[j]
            rho = x[:, j] @ r
            new = _soft(rho, thresh) / col_sq[j]
            max_delta = max(max_delta, abs(new - w[j]))
            w[j] = new
            r -= x[:, j] * w[j]
        if max_delta < tol:
            converged = True
            break
    weights = {int(i): float(v) for i, v in enumerate(w) if v != 0.0}
    model = LinearModel("lasso", d, weights, mu, _recorded_norms(weights))
    if not converged:
        raise ConvergenceError(f"LASSO did not converge in {max_iter} sweeps",
                               details={"mu": mu})
    return model


def lasso_kkt_residual(features, labels, model: LinearModel) -> float:
    """Worst violation of the LASSO stationarity conditions at the solution."""
    y = np.asarray(labels, dtype=float)
    mu = model.regularization
    if isinstance(features, FeatureBatch):
        n = features.n
        r = y - predict_batch(model, features)
        worst = 0.0
        for b in range(features.indices.shape[1]):
            v = float(features.values[b])
            if v == 0.0:
                continue
            cells, inv = np.unique(features.indices[:, b],
                                   return_inverse=True)
            corr = (2.0 / n) * v * np.bincount(inv, weights=r)
            for c, g in zip(cells, corr):
                wv = model.weight_at(c)
                if wv != 0.0:
                    worst = max(worst, abs(g - mu * np.sign(wv)))
                else:
                    worst = max(worst, max(0.0, abs(g) - mu))
        return float(worst)
    x = np.asarray(features, dtype=float)
    n = x.shape[0]
    w = np.zeros(model.dimension)
    for i, v in model.weights.items():
        w[i] = v
    corr = (2.0 / n) * (x.T @ (y - x @ w))
    worst = 0.0
    for j in range(model.dimension):
        if w[j] != 0.0:
            worst = max(worst, abs(corr[j] - mu * np.sign(w[j])))
        else:
            worst = max(worst, max(0.0, abs(corr[j]) - mu))
    return float(worst)


def _lasso_duality_gap(batch: FeatureBatch, y, model: LinearModel,
                       mu: float) -> float:
    n = batch.n
    r = y - predict_batch(model, batch)
    theta = (2.0 / n) * r
    # scale into the dual-feasible region ||X^T theta||_inf <= mu
    worst = 0.0
    for b in range(batch.indices.shape[1]):
        v = float(batch.values[b])
        if v == 0.0:
            continue
        cells, inv = np.unique(batch.indices[:, b], return_inverse=True)
        corr = np.abs(v * np.bincount(inv, weights=theta))
        worst = max(worst, float(corr.max()))
    if worst > mu:
        theta = theta * (mu / worst)
    primal = float((r @ r) / n + mu * model.norms[0])
    dual = float(-(n / 4.0) * (theta @ theta) + theta @ y)
    return primal - dual


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def predict(model: LinearModel, feature, clamp: float | None = None) -> float:
    """w . f(x); pass an optional clamp bound to clip into [-clamp, clamp]."""
    if isinstance(feature, FeatureVector):
        if feature.dimension != model.dimension:
            raise ValueError("feature dimension mismatch")
        val = float(sum(v * model.weight_at(i)
                        for i, v in zip(feature.indices, feature.values)))
    else:
        f = np.asarray(feature, dtype=float)
        if f.shape != (model.dimension,):
            raise ValueError("feature dimension mismatch")
        val = float(sum(f[i] * w for i, w in model.weights.items()))
    if clamp is not None:
        val = float(np.clip(val, -clamp, clamp))
    return val


def predict_batch(model: LinearModel, batch: FeatureBatch,
                  clamp: float | None = None) -> np.ndarray:
    if batch.dimension != model.dimension:
        raise ValueError("feature dimension mismatch")
    out = np.zeros(batch.n)
    for b in range(batch.indices.shape[1]):
        v = float(batch.values[b])
        if v == 0.0:
            continue
        col = batch.indices[:, b]
        cells, inv = np.unique(col, return_inverse=True)
        wvals = np.array([model.weight_at(c) for c in cells])
        out += v * wvals[inv]
    if clamp is not None:
        out = np.clip(out, -clamp, clamp)
    return out


def predict_dual(model: LinearModel, batch: FeatureBatch) -> np.ndarray:
    """Kernel-path prediction sum_l alpha_l K(x_l, x); ridge models only."""
    if model.dual_coef is None:
        raise ValueError("model carries no dual data")
    train = FeatureBatch(model.dimension, model.train_indices,
                         model.train_values)
    k = kernel_cross(train, batch.indices)
    return k.T @ model.dual_coef


# ---------------------------------------------------------------------------
# Cross-validation and serialization
# ---------------------------------------------------------------------------


def _subset(features, rows):
    if isinstance(features, FeatureBatch):
        return FeatureBatch(features.dimension, features.indices[rows],
                            features.values)
    return features[rows]


def _cross_validate(fit, features, y, grid, folds, seed) -> float:
    n = y.shape[0]
    folds = min(folds, n)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    split = np.array_split(perm, folds)
    best = (np.inf, float(grid[0]))
    for g in grid:
        errs = []
        for f in range(folds):
            val = split[f]
            train = np.concatenate([split[i] for i in range(folds) if i != f])
            if len(train) == 0 or len(val) == 0:
                continue
            try:
                m = fit(_subset(features, train), y[train], float(g))
            except ConvergenceError:
                errs.append(np.inf)
                continue
            if isinstance(features, FeatureBatch):
                preds = predict_batch(m, _subset(features, val))
            else:
                preds = np.array([predict(m, row)
                                  for row in features[val]])
            errs.append(float(np.mean((preds - y[val]) ** 2)))
        mean_err = float(np.mean(errs)) if errs else np.inf
        if mean_err < best[0]:
            best = (mean_err, float(g))
    return best[1]


def model_to_json(model: LinearModel) -> str:
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "dimension": model.dimension,
        "regularization": model.regularization,
        "norms": list(model.norms),
        "indices": [int(i) for i in model.weights],
        "weights": [model.weights[i] for i in model.weights],
    }
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> LinearModel:
    doc = json.loads(text)
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('version')!r}")
    weights = {int(i): float(w)
               for i, w in zip(doc["indices"], doc["weights"])}
    return LinearModel(doc["kind"], int(doc["dimension"]), weights,
                       float(doc["regularization"]),
                       (float(doc["norms"][0]), float(doc["norms"][1])))
