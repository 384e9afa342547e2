"""Ridge and LASSO against closed-form and normal-equation oracles."""

import json

import numpy as np
import pytest

from gslearn.errors import ConvergenceError
from gslearn.featuremap import (FeatureSpace, HyperParams,
                                feature_batch, phi_tilde)
from gslearn.lattice import build_heisenberg, enumerate_geo_paulis
from gslearn.linear_models import (gram_matrix, lasso_fit,
                                   lasso_kkt_residual, model_from_json,
                                   model_to_json, predict, predict_batch,
                                   predict_dual, ridge_fit,
                                   ridge_gradient_norm)


@pytest.fixture(scope="module")
def desk():
    ham, obs = build_heisenberg(2, 3)
    geo = enumerate_geo_paulis(ham.lattice, 1, 2)
    space = FeatureSpace(ham, geo, HyperParams(0.0, 1.0))
    rng = np.random.default_rng(7)
    xs = rng.uniform(-1, 1, (40, ham.m))
    return ham, obs, space, xs


# -- ridge ---------------------------------------------------------------------


def test_ridge_zero_labels(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, obs[0])
    model = ridge_fit(batch, np.zeros(len(xs)), lam=1e-3)
    assert model.norms == (0.0, 0.0)
    assert np.allclose(predict_batch(model, batch), 0.0)


def test_ridge_1d_closed_form(rng):
    # single feature column c: w = (c^T y) / (c^T c + N*lam)
    n = 25
    c = rng.standard_normal(n)
    y = rng.standard_normal(n)
    lam = 0.37
    model = ridge_fit(c[:, None], y, lam=lam)
    expected = (c @ y) / (c @ c + n * lam)
    assert model.weights.get(0, 0.0) == pytest.approx(expected, abs=1e-9)


def test_ridge_interpolates_noiseless_target(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, obs[0])
    rng = np.random.default_rng(3)
    w0 = rng.standard_normal(space.dimension) * 0.1
    y = np.array([w0[batch.indices[i]] @ batch.values
                  for i in range(batch.n)])
    model = ridge_fit(batch, y, lam=1e-10)
    preds = predict_batch(model, batch)
    rmse = np.sqrt(np.mean((preds - y) ** 2))
    assert rmse <= 1e-6


def test_ridge_gradient_optimality(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, obs[0])
    y = np.random.default_rng(5).uniform(-1, 0, batch.n)
    model = ridge_fit(batch, y, lam=1e-2)
    assert ridge_gradient_norm(batch, y, model) <= 1e-7


def test_ridge_dual_equals_primal(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, obs[0])
    y = np.random.default_rng(6).uniform(-1, 0, batch.n)
    model = ridge_fit(batch, y, lam=1e-3)
    other = feature_batch(np.random.default_rng(8).uniform(-1, 1, (15, 7)),
                          space, obs[0])
    primal = predict_batch(model, other)
    dual = predict_dual(model, other)
    assert np.abs(primal - dual).max() <= 1e-9


def test_ridge_mse_monotone_in_lambda(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, obs[0])
    y = np.random.default_rng(9).uniform(-1, 0, batch.n)
    mses = []
    for lam in (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
        model = ridge_fit(batch, y, lam=lam)
        preds = predict_batch(model, batch)
        mses.append(float(np.mean((preds - y) ** 2)))
    assert all(a >= b - 1e-12 for a, b in zip(mses, mses[1:]))


def test_gram_matches_dense_dot(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs[:12], space, obs[0])
    k = gram_matrix(batch)
    dense = batch.to_dense()
    assert np.allclose(k, dense @ dense.T, atol=1e-12)


def test_ridge_norms_recorded(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, obs[0])
    y = np.random.default_rng(2).uniform(-1, 0, batch.n)
    model = ridge_fit(batch, y, lam=1e-3)
    vals = np.array(list(model.weights.values()))
    assert model.norms[0] == pytest.approx(np.abs(vals).sum(), abs=1e-10)
    assert model.norms[1] == pytest.approx(np.sqrt((vals**2).sum()),
                                           abs=1e-10)


# -- lasso ---------------------------------------------------------------------


def test_lasso_full_shrinkage(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, None)
    y = np.random.default_rng(1).uniform(-1, 0, batch.n)
    model = lasso_fit(batch, y, mu=1e3)
    assert model.norms == (0.0, 0.0)


def test_lasso_soft_threshold_closed_form(rng):
    # orthonormal single column: w = sign(rho) * max(|rho| - N*mu/2, 0)
    n = 16
    c = rng.standard_normal(n)
    c /= np.linalg.norm(c)
    y = rng.standard_normal(n)
    rho = c @ y
    for mu in (1e-3, 0.05, 10.0):
        model = lasso_fit(c[:, None], y, mu=mu)
        expected = np.sign(rho) * max(abs(rho) - n * mu / 2, 0.0)
        assert model.weights.get(0, 0.0) == pytest.approx(expected, abs=1e-9)


def test_lasso_matches_least_squares_at_tiny_mu(rng):
    n, d = 60, 4
    x = rng.standard_normal((n, d))
    w_true = np.array([0.5, -1.0, 0.0, 2.0])
    y = x @ w_true
    model = lasso_fit(x, y, mu=1e-9, max_iter=100000)
    w_ls = np.linalg.lstsq(x, y, rcond=None)[0]
    w_got = np.array([model.weights.get(j, 0.0) for j in range(d)])
    assert np.abs(w_got - w_ls).max() <= 1e-6


def test_lasso_kkt_residual(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, None)
    y = np.random.default_rng(4).uniform(-1, 0, batch.n)
    model = lasso_fit(batch, y, mu=1e-3)
    assert lasso_kkt_residual(batch, y, model) <= 1e-6


def test_lasso_blocks_match_dense_path(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs[:15], space, None)
    y = np.random.default_rng(12).uniform(-1, 0, 15)
    sparse_model = lasso_fit(batch, y, mu=5e-3)
    dense_model = lasso_fit(batch.to_dense(), y, mu=5e-3)
    for j in range(space.dimension):
        assert sparse_model.weights.get(j, 0.0) == pytest.approx(
            dense_model.weights.get(j, 0.0), abs=1e-6)


def test_lasso_convergence_error():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((10, 3))
    y = rng.standard_normal(10)
    with pytest.raises(ConvergenceError) as err:
        lasso_fit(x, y, mu=1e-9, max_iter=2)
    assert "converge" in str(err.value)


# -- prediction and serialization ------------------------------------------------


def test_predict_one_hot(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, obs[0])
    y = np.random.default_rng(13).uniform(-1, 0, batch.n)
    model = ridge_fit(batch, y, lam=1e-3)
    fv = phi_tilde(xs[0], obs[0], space)
    expected = sum(v * model.weights.get(int(i), 0.0)
                   for i, v in zip(fv.indices, fv.values))
    assert predict(model, fv) == pytest.approx(expected, abs=1e-12)


def test_predict_clamp(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, obs[0])
    y = 5.0 * np.ones(batch.n)
    model = ridge_fit(batch, y, lam=1e-10)
    raw = predict_batch(model, batch)
    clamped = predict_batch(model, batch, clamp=1.0)
    assert raw.max() > 1.0
    assert clamped.max() <= 1.0


def test_cv_selects_reasonable_penalty(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, obs[0])
    rng = np.random.default_rng(14)
    w0 = rng.standard_normal(space.dimension) * 0.1
    y = np.array([w0[batch.indices[i]] @ batch.values
                  for i in range(batch.n)]) + 0.01 * rng.standard_normal(40)
    model = ridge_fit(batch, y, lam=None, cv_folds=4,
                      cv_grid=[1e-6, 1e-3, 1.0])
    # noiseless-ish target: CV should not pick the heaviest penalty
    assert model.regularization < 1.0


def test_model_json_round_trip(desk):
    _, obs, space, xs = desk
    batch = feature_batch(xs, space, obs[0])
    y = np.random.default_rng(15).uniform(-1, 0, batch.n)
    model = lasso_fit(batch, y, mu=1e-3)
    again = model_from_json(model_to_json(model))
    assert again.kind == "lasso"
    assert again.dimension == model.dimension
    assert again.weights == model.weights
    preds_a = predict_batch(model, batch)
    preds_b = predict_batch(again, batch)
    assert np.allclose(preds_a, preds_b)
    with pytest.raises(ValueError):
        doc = json.loads(model_to_json(model))
        doc["version"] = 99
        model_from_json(json.dumps(doc))
