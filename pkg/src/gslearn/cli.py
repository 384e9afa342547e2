"""Command-line entry points: gen-data, train, eval, scaling, qmc-diag.

Exit codes: 0 success, 2 configuration error, 3 capacity error,
4 convergence error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, qmc
from .errors import CapacityError, ConfigError, ConvergenceError
from .neuralnet import TrainConfig


def _add_data_flags(p):
    p.add_argument("--rows", type=int, default=2)
    p.add_argument("--cols", type=int, default=3)
    p.add_argument("--allpairs", action="store_true")
    p.add_argument("--distribution", default="sobol",
                   choices=["sobol", "uniform", "product"])
    p.add_argument("--density-json", default=None,
                   help="JSON family spec(s) for --distribution product")
    p.add_argument("--base-points", default="sobol",
                   choices=["sobol", "uniform"])
    p.add_argument("--n-train", type=int, default=512)
    p.add_argument("--n-test", type=int, default=256)
    p.add_argument("--label-source", default="exact",
                   choices=["exact", "shadow"])
    p.add_argument("--shadow-rounds", type=int, default=10000)
    p.add_argument("--store-shadows", action="store_true")
    p.add_argument("--shadow-format", default="npz", choices=["npz", "json"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--capacity", type=int, default=16)


def _add_model_flags(p):
    p.add_argument("--model", default="ridge",
                   choices=["mean", "ridge", "lasso", "nn"])
    p.add_argument("--delta1", type=float, default=0.0)
    p.add_argument("--delta2", type=float, default=1.0)
    p.add_argument("--geo-radius", type=int, default=1)
    p.add_argument("--geo-max-weight", type=int, default=2)
    p.add_argument("--ridge-lambda", type=float, default=None)
    p.add_argument("--lasso-mu", type=float, default=None)
    p.add_argument("--clamp", action="store_true")
    p.add_argument("--nn-width", type=int, default=64)
    p.add_argument("--nn-depth", type=int, default=2)
    p.add_argument("--nn-epochs", type=int, default=300)
    p.add_argument("--nn-batch-size", type=int, default=128)
    p.add_argument("--nn-lr", type=float, default=1e-3)
    p.add_argument("--nn-lambda-l1", type=float, default=1e-3)
    p.add_argument("--nn-weight-decay", type=float, default=1e-4)
    p.add_argument("--model-seed", type=int, default=0)


def _experiment_config(args) -> harness.ExperimentConfig:
    density = json.loads(args.density_json) if args.density_json else None
    return harness.ExperimentConfig(
        rows=args.rows, cols=args.cols, allpairs=args.allpairs,
        distribution=args.distribution, density=density,
        base_points=args.base_points, n_train=args.n_train,
        n_test=args.n_test, label_source=args.label_source,
        shadow_rounds=args.shadow_rounds, store_shadows=args.store_shadows,
        shadow_format=args.shadow_format, seed=args.seed,
        capacity=args.capacity)


def _model_config(args) -> harness.ModelConfig:
    nn = TrainConfig(width=args.nn_width, depth=args.nn_depth,
                     epochs=args.nn_epochs, batch_size=args.nn_batch_size,
                     lr=args.nn_lr, lambda_l1=args.nn_lambda_l1,
                     weight_decay=args.nn_weight_decay, seed=args.model_seed)
    return harness.ModelConfig(
        kind=args.model, delta1=args.delta1, delta2=args.delta2,
        geo_radius=args.geo_radius, geo_max_weight=args.geo_max_weight,
        ridge_lambda=args.ridge_lambda, lasso_mu=args.lasso_mu,
        clamp=args.clamp, nn=nn, seed=args.model_seed)


def _cmd_gen_data(args) -> int:
    cfg = _experiment_config(args)
    out = Path(args.out)
    path = out if out.suffix == ".json" else out / "dataset.json"
    dataset = harness.generate_dataset(cfg, out_path=path)
    print(f"wrote {path} ({dataset.x.shape[0]} records, "
          f"m={dataset.x.shape[1]})")
    return 0


def _cmd_train(args) -> int:
    dataset = harness.load_dataset(args.dataset)
    mcfg = _model_config(args)
    artifact = harness.train_model(dataset, mcfg)
    harness.save_artifact(artifact, args.out)
    print(f"trained {artifact.kind} on {artifact.n_train} points in "
          f"{artifact.wall_time_s:.2f}s -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    dataset = harness.load_dataset(args.dataset)
    artifact = harness.load_artifact(args.artifact)
    rows = harness.evaluate(artifact, dataset, split=args.split)
    harness.write_results_csv(rows, args.out)
    agg = harness.aggregate_rmse(rows)
    print(f"{args.split} aggregate RMSE = {agg:.6f} -> {args.out}")
    return 0


def _cmd_scaling(args) -> int:
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        nn = TrainConfig(**doc.pop("nn", {}))
        doc["sizes"] = [tuple(s) for s in doc.get("sizes", [])] or None
        kwargs = {k: v for k, v in doc.items() if v is not None}
        scfg = harness.ScalingConfig(nn=nn, **kwargs)
    else:
        scfg = harness.ScalingConfig()
    if args.out:
        scfg.out_dir = args.out
    rows = harness.scaling_experiment(scfg)
    print(f"{len(rows)} result rows -> {scfg.out_dir}")
    return 0


_KH_CORPUS = {
    "one": lambda p: np.ones(p.shape[:-1]),
    "x0": lambda p: p[..., 0],
    "prod": lambda p: np.prod(p, axis=-1),
    "poly3": lambda p: p[..., 0] ** 3 - 0.5 * p[..., 0] ** 2 + p[..., 0],
}


def _cmd_qmc_diag(args) -> int:
    if args.generator == "sobol":
        ps = qmc.sobol_points(args.n, args.d)
    else:
        ps = qmc.uniform_points(args.n, args.d, args.seed)
    disc = qmc.star_discrepancy(ps)
    report = {
        "generator": args.generator,
        "n": args.n,
        "d": args.d,
        "dstar_lower": disc.lower,
        "dstar_upper": disc.upper,
        "dstar_exact": disc.exact,
        "koksma_hlawka": {},
    }
    for name, f in _KH_CORPUS.items():
        kh = qmc.koksma_hlawka_check(f, ps)
        report["koksma_hlawka"][name] = {
            "qmc_error": kh.qmc_error, "variation": kh.variation,
            "bound": kh.bound, "holds": kh.holds,
        }
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gslearn",
        description="Ground-state property learning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a labeled dataset")
    _add_data_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="fit a model on a dataset")
    p.add_argument("--dataset", required=True)
    _add_model_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained artifact")
    p.add_argument("--dataset", required=True)
    p.add_argument("--artifact", required=True)
    p.add_argument("--split", default="test", choices=["train", "test"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("scaling", help="run the scaling sweep")
    p.add_argument("--config", default=None,
                   help="JSON file with ScalingConfig fields")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_scaling)

    p = sub.add_parser("qmc-diag", help="discrepancy / quadrature report")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--generator", default="sobol",
                   choices=["sobol", "uniform"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_qmc_diag)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
