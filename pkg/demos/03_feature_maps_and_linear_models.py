"""The geometric feature maps and the two linear learners.

Each geometrically local Pauli P gets a block of cells: the coordinates in
its neighborhood I_P are snapped to a grid of spacing delta2, and exactly
one cell indicator fires per block.  The baseline learner runs LASSO over
the plain indicators; the constant-sample learner runs kernel ridge over
indicators rescaled by sign(alpha_P) sqrt(|alpha_P|) for a known target
observable.
"""

import numpy as np

from gslearn import (FeatureSpace, HyperParams, build_heisenberg,
                     enumerate_geo_paulis, feature_batch, ground_state,
                     expectation, lasso_fit, phi, phi_tilde, predict_batch,
                     ridge_fit)

rng = np.random.default_rng(3)

ham, observables = build_heisenberg(2, 3)
geo = enumerate_geo_paulis(ham.lattice, radius=1, max_weight=2)
space = FeatureSpace(ham, geo, HyperParams(delta1=0.0, delta2=1.0))
print(f"|S^geo|={len(geo)}  feature dimension m_phi={space.dimension}")

x = rng.uniform(-1, 1, ham.m)
fv = phi(x, space)
print(f"phi(x): {fv.l0} active cells (one per Pauli), ||phi||_1={fv.l1:.0f}")
fv_t = phi_tilde(x, observables[0], space)
print(f"phi_tilde(x): ||.||_2^2 = {fv_t.l2_sq:.6f} "
      f"= sum|alpha_P| = {observables[0].abs_coeff_sum:.6f}")

# a small training run against exact labels for one correlator.  The
# piecewise-constant hypotheses are resolution-limited: ridge sees only the
# target's own blocks (a single cell table), while LASSO sums many
# overlapping block tables and resolves more structure at the same delta2.
n_train, n_test = 256, 96
xs = 2.0 * rng.random((n_train + n_test, ham.m)) - 1.0
target = observables[0]
ys = np.array([expectation(target, ground_state(ham, xi)) for xi in xs])
xs_tr, ys_tr = xs[:n_train], ys[:n_train]
xs_te, ys_te = xs[n_train:], ys[n_train:]

ridge_batch = feature_batch(xs_tr, space, target)
ridge = ridge_fit(ridge_batch, ys_tr, lam=1e-5)
preds = predict_batch(ridge, feature_batch(xs_te, space, target))
print(f"\nridge  (phi_tilde): test RMSE "
      f"{np.sqrt(np.mean((preds - ys_te)**2)):.4f}, "
      f"achieved ||w||_2={ridge.norms[1]:.3f}")

lasso_batch = feature_batch(xs_tr, space, None)
lasso = lasso_fit(lasso_batch, ys_tr, mu=2e-3)
preds = predict_batch(lasso, feature_batch(xs_te, space, None))
print(f"lasso  (phi):       test RMSE "
      f"{np.sqrt(np.mean((preds - ys_te)**2)):.4f}, "
      f"achieved ||w||_1={lasso.norms[0]:.3f}")

baseline = np.sqrt(np.mean((ys_tr.mean() - ys_te) ** 2))
print(f"predict-mean baseline RMSE {baseline:.4f}")
