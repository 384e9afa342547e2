"""End-to-end desk experiment through the harness.

Generates a labeled dataset (Sobol-distributed couplings, exact labels),
fits the mean baseline, kernel ridge, LASSO, and the network model, and
prints the test RMSE per model.  Equivalent CLI:

    gslearn gen-data --rows 2 --cols 3 --n-train 192 --n-test 96 \
        --distribution sobol --seed 0 --out runs/demo
    gslearn train --dataset runs/demo/dataset.json --model ridge \
        --delta1 0 --ridge-lambda 1e-5 --out runs/demo/ridge
    gslearn eval --dataset runs/demo/dataset.json \
        --artifact runs/demo/ridge --out runs/demo/ridge.csv
"""

from gslearn.harness import (ExperimentConfig, ModelConfig, aggregate_rmse,
                             evaluate, generate_dataset, train_model)
from gslearn.neuralnet import TrainConfig

cfg = ExperimentConfig(rows=2, cols=3, distribution="sobol",
                       n_train=192, n_test=96, seed=0)
dataset = generate_dataset(cfg)
print(f"dataset: {dataset.x.shape[0]} records, m={dataset.x.shape[1]}, "
      f"min gap {dataset.gaps.min():.3f}")

configs = [
    ModelConfig(kind="mean"),
    ModelConfig(kind="ridge", delta1=0.0, delta2=1.0, ridge_lambda=1e-5),
    ModelConfig(kind="lasso", delta1=0.0, delta2=1.0, lasso_mu=2e-3),
    ModelConfig(kind="nn", delta1=0.0,
                nn=TrainConfig(width=32, depth=2, epochs=80,
                               batch_size=64, seed=1)),
]
for mcfg in configs:
    artifact = train_model(dataset, mcfg)
    test_rmse = aggregate_rmse(evaluate(artifact, dataset, "test"))
    train_rmse = aggregate_rmse(evaluate(artifact, dataset, "train"))
    extra = ""
    if mcfg.kind == "nn":
        w_l1, theta_max = artifact.weight_summary()
        extra = f"  ||w||_1={w_l1:.2f} max|Theta|={theta_max:.2f}"
    print(f"{mcfg.kind:>6}: test RMSE {test_rmse:.4f} "
          f"(train {train_rmse:.4f}, {artifact.wall_time_s:.1f}s){extra}")
