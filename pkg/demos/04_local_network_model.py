"""Train the combined local tanh-network model on exact labels.

The model sums per-Pauli networks over their local coordinates,
f(x) = sum_P w_P mlp_P(x[I_P]), trained with AdamW on mean squared error
plus an l1 penalty on the last-layer weights w.
"""

import numpy as np

from gslearn import (TrainConfig, build_heisenberg, enumerate_geo_paulis,
                     expectation, ground_state, init_model,
                     local_coordinates, train, weight_report)

rng = np.random.default_rng(5)

ham, observables = build_heisenberg(1, 4)
target = observables[1]                 # middle bond of the chain
geo = enumerate_geo_paulis(ham.lattice, radius=1, max_weight=2)
delta1 = 1.0
i_p = [local_coordinates(p, ham, delta1) for p in geo]
print(f"|S^geo|={len(geo)}, |I_P| range "
      f"{min(map(len, i_p))}..{max(map(len, i_p))} at delta1={delta1}")

n_train, n_test = 192, 64
xs = 2.0 * rng.random((n_train + n_test, ham.m)) - 1.0
ys = np.array([expectation(target, ground_state(ham, xi)) for xi in xs])

cfg = TrainConfig(width=32, depth=2, epochs=200, batch_size=64,
                  lambda_l1=1e-3, lr=2e-3, seed=1)
model = init_model(geo, i_p, cfg, seed=1, delta1=delta1)
model, trace = train(model, xs[:n_train], ys[:n_train], cfg)

preds = model.forward_batch(xs[n_train:])
rmse = np.sqrt(np.mean((preds - ys[n_train:]) ** 2))
baseline = np.sqrt(np.mean((ys[:n_train].mean() - ys[n_train:]) ** 2))
w_l1, theta_max = weight_report(model)
print(f"epochs run: {trace.epochs_run} (early stop: {trace.stopped_early})")
print(f"objective {trace.objective[0]:.4f} -> {trace.objective[-1]:.5f}")
print(f"test RMSE {rmse:.4f}  (predict-mean baseline {baseline:.4f})")
print(f"last-layer ||w||_1 = {w_l1:.3f},  max|Theta| = {theta_max:.3f}")
