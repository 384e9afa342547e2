"""Experiment orchestration: dataset generation, training, evaluation.

Datasets pair sampled coupling vectors with exactly computed (or shadow-
estimated) ground-state labels for every target observable.  Training
dispatches to the linear models over the geometric feature maps or to the
local-network model; evaluation reports per-observable and aggregate RMSE
plus the last-layer l1 norm and the largest local parameter for networks.

Train points follow the configured distribution (uniform, Sobol, or a
product density reached through the inverse transform); test points are
always held-out i.i.d. draws from the target distribution, and the
train/test index sets are disjoint by construction (asserted on use).
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import linear_models, neuralnet, qmc, shadows
from .eigensolver import SolverConfig, expectation, ground_state
from .errors import ConfigError
from .featuremap import FeatureSpace, HyperParams, feature_batch
from .lattice import (build_heisenberg, build_heisenberg_allpairs,
                      enumerate_geo_paulis, local_coordinates)
from .neuralnet import TrainConfig

DATASET_SCHEMA = "gslearn.dataset.v1"
ARTIFACT_SCHEMA = "gslearn.artifact.v1"

RESULT_COLUMNS = ["rows", "cols", "n_sites", "delta1", "n_train", "model",
                  "seed", "observable", "split", "rmse", "w_l1", "theta_max",
                  "wall_time_s"]

# seed-stream tags so the different random consumers never collide
_STREAM_TRAIN, _STREAM_TEST, _STREAM_SHADOW = 1, 2, 3


@dataclass
class ExperimentConfig:
    rows: int = 2
    cols: int = 3
    allpairs: bool = False
    distribution: str = "sobol"           # sobol | uniform | product
    density: object = None                # family spec(s) for "product"
    base_points: str = "sobol"            # base sequence for the transform
    n_train: int = 512
    n_test: int = 256
    label_source: str = "exact"           # exact | shadow
    shadow_rounds: int = 10000
    store_shadows: bool = False
    shadow_format: str = "npz"            # npz | json
    seed: int = 0
    capacity: int = 16
    dense_cutoff: int = 12

    def validate(self):
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("n_train and n_test must be >= 1")
        if self.distribution not in ("sobol", "uniform", "product"):
            raise ConfigError(f"unknown distribution {self.distribution!r}")
        if self.distribution == "product" and self.density is None:
            raise ConfigError("product distribution needs a density spec")
        if self.label_source not in ("exact", "shadow"):
            raise ConfigError(f"unknown label source {self.label_source!r}")
        if self.shadow_format not in ("npz", "json"):
            raise ConfigError(f"unknown shadow format {self.shadow_format!r}")


@dataclass
class ModelConfig:
    kind: str = "ridge"                   # mean | ridge | lasso | nn
    delta1: float = 0.0
    delta2: float = 1.0
    geo_radius: int = 1
    geo_max_weight: int = 2
    ridge_lambda: float | None = None     # None -> cross-validated
    lasso_mu: float | None = None
    cv_folds: int = 5
    clamp: bool = False
    nn: TrainConfig = field(default_factory=TrainConfig)
    nn_joint: bool = True
    seed: int = 0

    def validate(self):
        if self.kind not in ("mean", "ridge", "lasso", "nn"):
            raise ConfigError(f"unknown model kind {self.kind!r}")


@dataclass
class Dataset:
    meta: dict
    x: np.ndarray
    y: np.ndarray
    energies: np.ndarray
    gaps: np.ndarray
    degeneracies: np.ndarray

    @property
    def train_idx(self) -> np.ndarray:
        return np.array(self.meta["train_idx"], dtype=int)

    @property
    def test_idx(self) -> np.ndarray:
        return np.array(self.meta["test_idx"], dtype=int)

    def check_split(self):
        overlap = set(self.meta["train_idx"]) & set(self.meta["test_idx"])
        if overlap:
            raise ConfigError(f"train/test leakage at indices {sorted(overlap)}")

    def to_json(self) -> str:
        doc = {
            "schema": DATASET_SCHEMA,
            "meta": self.meta,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "energies": self.energies.tolist(),
            "gaps": self.gaps.tolist(),
            "degeneracies": self.degeneracies.tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "Dataset":
        doc = json.loads(text)
        if doc.get("schema") != DATASET_SCHEMA:
            raise ConfigError(f"unsupported dataset schema "
                              f"{doc.get('schema')!r}")
        return Dataset(
            meta=doc["meta"],
            x=np.array(doc["x"], dtype=float),
            y=np.array(doc["y"], dtype=float),
            energies=np.array(doc["energies"], dtype=float),
            gaps=np.array(doc["gaps"], dtype=float),
            degeneracies=np.array(doc["degeneracies"], dtype=int),
        )


def rebuild_system(meta: dict):
    """(Hamiltonian, observables) from dataset metadata."""
    builder = meta["builder"]
    if builder == "heisenberg":
        return build_heisenberg(meta["rows"], meta["cols"],
                                capacity=meta.get("capacity", 16))
    if builder == "heisenberg_allpairs":
        return build_heisenberg_allpairs(meta["rows"], meta["cols"],
                                         capacity=meta.get("capacity", 16))
    raise ConfigError(f"unknown builder {builder!r}")


# ---------------------------------------------------------------------------
# Data generation
# ---------------------------------------------------------------------------


def _derived_seed(*entropy) -> int:
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _sample_parameters(cfg: ExperimentConfig, m: int) -> np.ndarray:
    """Train block followed by the held-out test block, in [-1,1]^m."""
    test_rng = np.random.default_rng(
        _derived_seed(cfg.seed, _STREAM_TEST))
    if cfg.distribution == "sobol":
        u_train = qmc.sobol_points(cfg.n_train, m).points
        u_test = test_rng.random((cfg.n_test, m))
    elif cfg.distribution == "uniform":
        train_rng = np.random.default_rng(
            _derived_seed(cfg.seed, _STREAM_TRAIN))
        u_train = train_rng.random((cfg.n_train, m))
        u_test = test_rng.random((cfg.n_test, m))
    else:  # product density through the inverse transform
        density = qmc.ProductDensity.from_spec(cfg.density, d=m)
        if cfg.base_points == "sobol":
            base = qmc.sobol_points(cfg.n_train, m)
        else:
            base = qmc.uniform_points(cfg.n_train, m,
                                      _derived_seed(cfg.seed, _STREAM_TRAIN))
        u_train = qmc.inverse_transform(base, density).points
        u_test = qmc.inverse_transform(
            qmc.PointSet(test_rng.random((cfg.n_test, m)), "uniform-random"),
            density).points
    return 2.0 * np.vstack([u_train, u_test]) - 1.0


def _shadow_for_record(gs, n_rounds: int, seed: int):
    """Shadow of the ground state; degenerate spaces split rounds uniformly."""
    if gs.degeneracy == 1:
        return shadows.sample_shadow(gs.ground_basis[:, 0], n_rounds, seed)
    rng = np.random.default_rng(_derived_seed(seed, 17))
    counts = rng.multinomial(n_rounds, [1.0 / gs.degeneracy] * gs.degeneracy)
    parts = []
    for col, cnt in enumerate(counts):
        if cnt == 0:
            continue
        parts.append(shadows.sample_shadow(gs.ground_basis[:, col],
                                           int(cnt),
                                           _derived_seed(seed, 23, col)))
    return shadows.ShadowRecord(
        bases=np.concatenate([p.bases for p in parts]),
        outcomes=np.concatenate([p.outcomes for p in parts]))


def generate_dataset(cfg: ExperimentConfig, out_path=None,
                     resume: bool = True) -> Dataset:
    """Solve every sampled instance and write the labeled dataset.

    Generation is resumable: records stream to ``<out>.partial.jsonl`` so an
    interrupted run picks up at the first missing index.  Per-record solver
    failures flush a manifest of failed indices before re-raising.  Workers
    are controlled by the GSLEARN_WORKERS environment variable.
    """
    cfg.validate()
    build = build_heisenberg_allpairs if cfg.allpairs else build_heisenberg
    ham, observables = build(cfg.rows, cfg.cols, capacity=cfg.capacity)
    solver = SolverConfig(capacity=cfg.capacity,
                          dense_cutoff=cfg.dense_cutoff)
    xs = _sample_parameters(cfg, ham.m)
    n_total = xs.shape[0]

    partial_path = Path(str(out_path) + ".partial.jsonl") if out_path else None
    done: dict[int, dict] = {}
    if resume and partial_path and partial_path.exists():
        for line in partial_path.read_text().splitlines():
            rec = json.loads(line)
            done[rec["index"]] = rec

    def solve_record(i: int) -> dict:
        gs = ground_state(ham, xs[i], solver)
        rec = {
            "index": i,
            "energy": gs.energy,
            "gap": gs.gap,
            "degeneracy": gs.degeneracy,
        }
        if cfg.label_source == "exact":
            rec["y"] = [expectation(o, gs) for o in observables]
        else:
            shadow = _shadow_for_record(
                gs, cfg.shadow_rounds, _derived_seed(cfg.seed,
                                                     _STREAM_SHADOW, i))
            # estimates are clipped into the observable's range so labels
            # keep the |tr(O rho)| <= sum|alpha_P| invariant at finite T
            rec["y"] = [
                float(np.clip(shadows.estimate_observable(shadow, o),
                              -o.abs_coeff_sum, o.abs_coeff_sum))
                for o in observables
            ]
            if cfg.store_shadows:
                rec["_shadow"] = shadow
        return rec

    todo = [i for i in range(n_total) if i not in done]
    n_workers = max(1, int(os.environ.get("GSLEARN_WORKERS", "1")))
    failures: list[dict] = []
    results: dict[int, dict] = {}
    if n_workers == 1:
        for i in todo:
            try:
                results[i] = solve_record(i)
            except Exception as exc:
                failures.append({"index": i, "error": repr(exc)})
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futs = {i: pool.submit(solve_record, i) for i in todo}
            for i, fut in futs.items():
                try:
                    results[i] = fut.result()
                except Exception as exc:
                    failures.append({"index": i, "error": repr(exc)})

    shadow_records = {}
    for i in sorted(results):
        rec = results[i]
        shadow = rec.pop("_shadow", None)
        if shadow is not None:
            shadow_records[i] = shadow
        done[i] = rec
        if partial_path:
            with open(partial_path, "a") as f:
                f.write(json.dumps(rec, sort_keys=True) + "\n")

    if failures:
        if out_path:
            manifest = Path(str(out_path) + ".manifest.json")
            manifest.write_text(json.dumps(
                {"failed": failures,
                 "completed": sorted(done.keys())}, sort_keys=True))
        raise ConfigError(
            f"{len(failures)} record(s) failed; manifest written"
            if out_path else f"{len(failures)} record(s) failed")

    gaps_arr = np.array([done[i]["gap"] for i in range(n_total)])
    meta = {
        "builder": "heisenberg_allpairs" if cfg.allpairs else "heisenberg",
        "rows": cfg.rows,
        "cols": cfg.cols,
        "capacity": cfg.capacity,
        "m": ham.m,
        "gap_stats": {"min": float(gaps_arr.min()),
                      "mean": float(gaps_arr.mean()),
                      "max": float(gaps_arr.max())},
        "observables": [o.to_dict() for o in observables],
        "distribution": cfg.distribution,
        "density": cfg.density,
        "base_points": cfg.base_points,
        "label_source": cfg.label_source,
        "shadow_rounds": (cfg.shadow_rounds
                          if cfg.label_source == "shadow" else None),
        "seed": cfg.seed,
        "n_train": cfg.n_train,
        "n_test": cfg.n_test,
        "train_idx": list(range(cfg.n_train)),
        "test_idx": list(range(cfg.n_train, n_total)),
    }
    dataset = Dataset(
        meta=meta,
        x=xs,
        y=np.array([done[i]["y"] for i in range(n_total)]),
        energies=np.array([done[i]["energy"] for i in range(n_total)]),
        gaps=gaps_arr,
        degeneracies=np.array([done[i]["degeneracy"]
                               for i in range(n_total)], dtype=int),
    )
    dataset.check_split()
    if out_path:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(dataset.to_json())
        if partial_path.exists():
            partial_path.unlink()
        if shadow_records:
            stem = str(out_path).rsplit(".", 1)[0]
            if cfg.shadow_format == "npz":
                shadows.save_shadows_npz(
                    stem + ".shadows.npz",
                    [shadow_records[i] for i in sorted(shadow_records)])
            else:
                payload = {str(i): shadows.shadow_to_json(s)
                           for i, s in sorted(shadow_records.items())}
                Path(stem + ".shadows.json").write_text(
                    json.dumps(payload, sort_keys=True))
    return dataset


def load_dataset(path) -> Dataset:
    return Dataset.from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class ModelArtifact:
    kind: str
    observable_names: list[str]
    models: dict                      # name -> fitted model (or mean value)
    config: ModelConfig
    n_train: int
    seed: int
    wall_time_s: float
    traces: dict = field(default_factory=dict)

    def weight_summary(self):
        """(max ||w||_1, max max|Theta|) across observables; NaN for linear."""
        if self.kind != "nn":
            return float("nan"), float("nan")
        l1s, thetas = [], []
        for m in self.models.values():
            l1, th = neuralnet.weight_report(m)
            l1s.append(l1)
            thetas.append(th)
        return float(max(l1s)), float(max(thetas))


def _make_space(ham, mcfg: ModelConfig) -> FeatureSpace:
    geo = enumerate_geo_paulis(ham.lattice, mcfg.geo_radius,
                               mcfg.geo_max_weight)
    hp = HyperParams(delta1=mcfg.delta1, delta2=mcfg.delta2)
    return FeatureSpace(ham, geo, hp)


def train_model(dataset: Dataset, mcfg: ModelConfig) -> ModelArtifact:
    """Fit the configured model on the dataset's training split."""
    mcfg.validate()
    dataset.check_split()
    ham, observables = rebuild_system(dataset.meta)
    names = [o.name for o in observables]
    tr = dataset.train_idx
    x_tr = dataset.x[tr]
    y_tr = dataset.y[tr]
    t0 = time.perf_counter()
    models: dict = {}
    traces: dict = {}

    if mcfg.kind == "mean":
        for k, name in enumerate(names):
            models[name] = float(np.mean(y_tr[:, k]))
    elif mcfg.kind in ("ridge", "lasso"):
        space = _make_space(ham, mcfg)
        if mcfg.kind == "ridge":
            for k, (name, obs) in enumerate(zip(names, observables)):
                batch = feature_batch(x_tr, space, obs)
                models[name] = linear_models.ridge_fit(
                    batch, y_tr[:, k], lam=mcfg.ridge_lambda,
                    cv_folds=mcfg.cv_folds, seed=mcfg.seed)
        else:
            batch = feature_batch(x_tr, space, None)
            for k, name in enumerate(names):
                models[name] = linear_models.lasso_fit(
                    batch, y_tr[:, k], mu=mcfg.lasso_mu,
                    cv_folds=mcfg.cv_folds, seed=mcfg.seed)
    else:  # nn
        # per-target models share no parameters, so minimizing the summed
        # multi-target objective (the "joint" mode) decomposes exactly into
        # the per-target loops below; the flag only controls whether a
        # combined objective is reported in the traces.  No cell grids are
        # involved: the network needs only the Pauli set and the I_P map.
        geo = enumerate_geo_paulis(ham.lattice, mcfg.geo_radius,
                                   mcfg.geo_max_weight)
        i_p = [local_coordinates(p, ham, mcfg.delta1) for p in geo]
        for k, name in enumerate(names):
            model0 = neuralnet.init_model(
                geo, i_p, mcfg.nn,
                seed=_derived_seed(mcfg.nn.seed, k), delta1=mcfg.delta1)
            cfg_k = TrainConfig(**{**asdict(mcfg.nn),
                                   "seed": _derived_seed(mcfg.nn.seed, k, 1)})
            cfg_k.betas = tuple(cfg_k.betas)
            model, trace = neuralnet.train(model0, x_tr, y_tr[:, k], cfg_k)
            models[name] = model
            traces[name] = trace.summary()
        if mcfg.nn_joint:
            traces["joint_objective"] = float(
                sum(t["final_objective"] for t in traces.values()
                    if isinstance(t, dict)))

    return ModelArtifact(kind=mcfg.kind, observable_names=names,
                         models=models, config=mcfg, n_train=len(tr),
                         seed=mcfg.seed,
                         wall_time_s=time.perf_counter() - t0, traces=traces)


def _predictions(artifact: ModelArtifact, dataset: Dataset,
                 rows: np.ndarray) -> np.ndarray:
    ham, observables = rebuild_system(dataset.meta)
    xs = dataset.x[rows]
    n = len(rows)
    preds = np.empty((n, len(artifact.observable_names)))
    if artifact.kind == "mean":
        for k, name in enumerate(artifact.observable_names):
            preds[:, k] = artifact.models[name]
        return preds
    if artifact.kind == "nn":
        for k, name in enumerate(artifact.observable_names):
            preds[:, k] = artifact.models[name].forward_batch(xs)
        return preds
    space = _make_space(ham, artifact.config)
    for k, (name, obs) in enumerate(zip(artifact.observable_names,
                                        observables)):
        model = artifact.models[name]
        batch = feature_batch(
            xs, space, obs if artifact.kind == "ridge" else None)
        clamp = obs.abs_coeff_sum if artifact.config.clamp else None
        preds[:, k] = linear_models.predict_batch(model, batch, clamp=clamp)
    return preds


def evaluate(artifact: ModelArtifact, dataset: Dataset,
             split: str = "test") -> list[dict]:
    """Per-observable rows plus the aggregate "ALL" row for one split."""
    dataset.check_split()
    rows_idx = dataset.train_idx if split == "train" else dataset.test_idx
    preds = _predictions(artifact, dataset, rows_idx)
    truth = dataset.y[rows_idx]
    meta = dataset.meta
    w_l1, theta_max = artifact.weight_summary()
    out = []
    base = {
        "rows": meta["rows"], "cols": meta["cols"],
        "n_sites": meta["rows"] * meta["cols"],
        "delta1": artifact.config.delta1,
        "n_train": artifact.n_train,
        "model": artifact.kind,
        "seed": artifact.seed,
        "split": split,
        "w_l1": w_l1,
        "theta_max": theta_max,
        "wall_time_s": artifact.wall_time_s,
    }
    for k, name in enumerate(artifact.observable_names):
        rmse = float(np.sqrt(np.mean((preds[:, k] - truth[:, k]) ** 2)))
        out.append({**base, "observable": name, "rmse": rmse})
    agg = float(np.sqrt(np.mean((preds - truth) ** 2)))
    out.append({**base, "observable": "ALL", "rmse": agg})
    return out


def aggregate_rmse(rows: list[dict]) -> float:
    for r in rows:
        if r["observable"] == "ALL":
            return r["rmse"]
    raise ValueError("no aggregate row present")


def write_results_csv(rows: list[dict], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(",".join(RESULT_COLUMNS) + "\n")
        for r in rows:
            f.write(",".join(repr(r[c]) if isinstance(r[c], float)
                             else str(r[c]) for c in RESULT_COLUMNS) + "\n")


# ---------------------------------------------------------------------------
# Artifact persistence
# ---------------------------------------------------------------------------


def save_artifact(artifact: ModelArtifact, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entry: dict = {
        "schema": ARTIFACT_SCHEMA,
        "kind": artifact.kind,
        "observables": artifact.observable_names,
        "config": _config_to_dict(artifact.config),
        "n_train": artifact.n_train,
        "seed": artifact.seed,
        "wall_time_s": artifact.wall_time_s,
        "traces": artifact.traces,
    }
    if artifact.kind == "mean":
        entry["means"] = {k: v for k, v in artifact.models.items()}
    else:
        for name, model in artifact.models.items():
            fname = f"model_{name}.json"
            if artifact.kind == "nn":
                text = neuralnet.checkpoint_to_json(model)
            else:
                text = linear_models.model_to_json(model)
            (out / fname).write_text(text)
        entry["model_files"] = {name: f"model_{name}.json"
                                for name in artifact.models}
    (out / "artifact.json").write_text(json.dumps(entry, sort_keys=True))


def load_artifact(out_dir) -> ModelArtifact:
    out = Path(out_dir)
    entry = json.loads((out / "artifact.json").read_text())
    if entry.get("schema") != ARTIFACT_SCHEMA:
        raise ConfigError(f"unsupported artifact schema {entry.get('schema')!r}")
    mcfg = _config_from_dict(entry["config"])
    models: dict = {}
    if entry["kind"] == "mean":
        models = {k: float(v) for k, v in entry["means"].items()}
    else:
        for name, fname in entry["model_files"].items():
            text = (out / fname).read_text()
            if entry["kind"] == "nn":
                models[name] = neuralnet.checkpoint_from_json(text)
            else:
                models[name] = linear_models.model_from_json(text)
    return ModelArtifact(kind=entry["kind"],
                         observable_names=entry["observables"],
                         models=models, config=mcfg,
                         n_train=entry["n_train"], seed=entry["seed"],
                         wall_time_s=entry["wall_time_s"],
                         traces=entry.get("traces", {}))


def _config_to_dict(mcfg: ModelConfig) -> dict:
    doc = asdict(mcfg)
    doc["nn"]["betas"] = list(doc["nn"]["betas"])
    return doc


def _config_from_dict(doc: dict) -> ModelConfig:
    doc = dict(doc)
    nn = dict(doc.pop("nn"))
    nn["betas"] = tuple(nn["betas"])
    return ModelConfig(nn=TrainConfig(**nn), **doc)


# ---------------------------------------------------------------------------
# Scaling experiments
# ---------------------------------------------------------------------------


@dataclass
class ScalingConfig:
    sizes: list = field(default_factory=lambda: [(1, 4), (2, 3), (2, 4),
                                                 (2, 5)])
    delta1_list: list = field(default_factory=lambda: [0.0, 1.0])
    n_train_list: list = field(default_factory=lambda: [64, 128, 256, 512])
    models: list = field(default_factory=lambda: ["mean", "ridge", "lasso",
                                                  "nn"])
    n_test: int = 256
    distribution: str = "sobol"
    seed: int = 0
    delta2: float = 1.0
    ridge_lambda: float | None = None
    lasso_mu: float | None = None
    nn: TrainConfig = field(default_factory=TrainConfig)
    out_dir: str = "runs/scaling"


def scaling_experiment(scfg: ScalingConfig) -> list[dict]:
    """Cartesian sweep over sizes, locality radii, and training sizes.

    Each size generates one dataset at the largest training size; smaller
    training sets reuse its prefix (valid for both Sobol and i.i.d. draws).
    Rows flush to results.csv after every cell so failures keep partial
    output; panel CSVs are written at the end from whatever completed.
    """
    out = Path(scfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    all_rows: list[dict] = []
    results_path = out / "results.csv"
    n_max = max(scfg.n_train_list)
    try:
        for rows_, cols_ in scfg.sizes:
            ecfg = ExperimentConfig(rows=rows_, cols=cols_,
                                    distribution=scfg.distribution,
                                    n_train=n_max, n_test=scfg.n_test,
                                    seed=scfg.seed)
            dataset = generate_dataset(
                ecfg, out_path=out / f"dataset_{rows_}x{cols_}.json")
            for n_train in scfg.n_train_list:
                sub = _subset_train(dataset, n_train)
                for delta1 in scfg.delta1_list:
                    for kind in scfg.models:
                        mcfg = ModelConfig(
                            kind=kind, delta1=delta1, delta2=scfg.delta2,
                            ridge_lambda=scfg.ridge_lambda,
                            lasso_mu=scfg.lasso_mu, nn=scfg.nn,
                            seed=scfg.seed)
                        art = train_model(sub, mcfg)
                        all_rows.extend(evaluate(art, sub, "train"))
                        all_rows.extend(evaluate(art, sub, "test"))
                        write_results_csv(all_rows, results_path)
    finally:
        write_results_csv(all_rows, results_path)
        _write_panels(all_rows, out, scfg)
    return all_rows


def _subset_train(dataset: Dataset, n_train: int) -> Dataset:
    if n_train > len(dataset.meta["train_idx"]):
        raise ConfigError("n_train exceeds the generated training block")
    meta = dict(dataset.meta)
    meta["train_idx"] = dataset.meta["train_idx"][:n_train]
    meta["n_train"] = n_train
    return Dataset(meta, dataset.x, dataset.y, dataset.energies,
                   dataset.gaps, dataset.degeneracies)


def _write_panels(rows: list[dict], out: Path, scfg: ScalingConfig) -> None:
    """Plot-ready CSVs: RMSE vs size, RMSE vs N, and NN weight norms."""
    agg = [r for r in rows if r["observable"] == "ALL"]
    n_max = max(scfg.n_train_list)

    def dump(path, header, lines):
        with open(path, "w") as f:
            f.write(header + "\n")
            for ln in lines:
                f.write(",".join(str(v) for v in ln) + "\n")

    size_rows = [(r["n_sites"], r["delta1"], r["model"], r["rmse"])
                 for r in agg
                 if r["split"] == "test" and r["n_train"] == n_max]
    dump(out / "panel_size.csv", "n_sites,delta1,model,test_rmse",
         sorted(size_rows))

    ntr_rows = [(r["n_train"], r["delta1"], r["model"], r["rmse"])
                for r in agg if r["split"] == "test"]
    dump(out / "panel_ntrain.csv", "n_train,delta1,model,test_rmse",
         sorted(ntr_rows))

    wt_rows = [(r["n_sites"], r["delta1"], r["rmse"], r["w_l1"],
                r["theta_max"])
               for r in agg
               if r["split"] == "train" and r["model"] == "nn"
               and r["n_train"] == n_max]
    dump(out / "panel_weights.csv",
         "n_sites,delta1,train_rmse,w_l1,theta_max", sorted(wt_rows))
