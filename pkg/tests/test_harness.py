"""Dataset generation, training dispatch, evaluation, and the CLI."""

import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gslearn.cli import main as cli_main
from gslearn.errors import ConfigError
from gslearn.harness import (Dataset, ExperimentConfig, ModelConfig,
                             ScalingConfig, aggregate_rmse, evaluate,
                             generate_dataset, load_artifact, load_dataset,
                             rebuild_system, save_artifact,
                             scaling_experiment, train_model,
                             write_results_csv, RESULT_COLUMNS)
from gslearn.neuralnet import TrainConfig


SMALL = dict(rows=1, cols=3, n_train=24, n_test=12, seed=3)


@pytest.fixture(scope="module")
def small_dataset():
    return generate_dataset(ExperimentConfig(**SMALL))


# -- generation -----------------------------------------------------------------


def test_single_bond_labels_are_singlet(tmp_path):
    cfg = ExperimentConfig(rows=1, cols=2, n_train=6, n_test=3, seed=1)
    ds = generate_dataset(cfg)
    # any J > 0 gives the singlet: every label is exactly -1.  J = 0 has
    # probability zero under the continuous sampling.
    assert np.allclose(ds.y, -1.0, atol=1e-9)


def test_generation_deterministic(tmp_path):
    cfg = ExperimentConfig(rows=2, cols=3, n_train=8, n_test=4, seed=5)
    a = generate_dataset(cfg, out_path=tmp_path / "a.json")
    b = generate_dataset(cfg, out_path=tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == \
        (tmp_path / "b.json").read_bytes()


def test_generation_resume(tmp_path):
    cfg = ExperimentConfig(**SMALL)
    path = tmp_path / "ds.json"
    full = generate_dataset(cfg, out_path=path)
    # simulate an interrupted run: pre-seed the partial file with a subset
    partial = Path(str(path) + ".partial.jsonl")
    path.unlink()
    lines = []
    for i in range(10):
        lines.append(json.dumps({
            "index": i,
            "y": full.y[i].tolist(),
            "energy": float(full.energies[i]),
            "gap": float(full.gaps[i]),
            "degeneracy": int(full.degeneracies[i]),
        }, sort_keys=True))
    partial.write_text("\n".join(lines) + "\n")
    resumed = generate_dataset(cfg, out_path=path, resume=True)
    assert np.allclose(resumed.y, full.y)
    assert not partial.exists()


def test_generation_worker_threads_deterministic(tmp_path, monkeypatch):
    cfg = ExperimentConfig(rows=1, cols=3, n_train=6, n_test=3, seed=9)
    serial = generate_dataset(cfg, out_path=tmp_path / "s.json")
    monkeypatch.setenv("GSLEARN_WORKERS", "3")
    threaded = generate_dataset(cfg, out_path=tmp_path / "t.json")
    assert (tmp_path / "s.json").read_text() == \
        (tmp_path / "t.json").read_text()


def test_dataset_round_trip(tmp_path, small_dataset):
    path = tmp_path / "ds.json"
    path.write_text(small_dataset.to_json())
    again = load_dataset(path)
    assert np.allclose(again.x, small_dataset.x)
    assert np.allclose(again.y, small_dataset.y)
    assert again.meta == small_dataset.meta


def test_dataset_schema_rejection(small_dataset):
    doc = json.loads(small_dataset.to_json())
    doc["schema"] = "gslearn.dataset.v999"
    with pytest.raises(ConfigError):
        Dataset.from_json(json.dumps(doc))


def test_split_leakage_detected(small_dataset):
    bad = Dataset(dict(small_dataset.meta), small_dataset.x,
                  small_dataset.y, small_dataset.energies,
                  small_dataset.gaps, small_dataset.degeneracies)
    bad.meta = dict(bad.meta)
    bad.meta["test_idx"] = bad.meta["train_idx"][:2]
    with pytest.raises(ConfigError):
        bad.check_split()


def test_labels_within_observable_bounds(small_dataset):
    assert np.all(small_dataset.y >= -1.0 - 1e-9)
    assert np.all(small_dataset.y <= 1.0 + 1e-9)


def test_shadow_labels_close_to_exact(tmp_path):
    cfg_exact = ExperimentConfig(rows=1, cols=2, n_train=4, n_test=2, seed=2)
    cfg_shadow = ExperimentConfig(rows=1, cols=2, n_train=4, n_test=2,
                                  seed=2, label_source="shadow",
                                  shadow_rounds=20000)
    exact = generate_dataset(cfg_exact)
    noisy = generate_dataset(cfg_shadow)
    assert np.abs(exact.y - noisy.y).mean() <= 0.05


def test_store_shadows_sidecar(tmp_path):
    cfg = ExperimentConfig(rows=1, cols=2, n_train=3, n_test=2, seed=2,
                           label_source="shadow", shadow_rounds=50,
                           store_shadows=True)
    generate_dataset(cfg, out_path=tmp_path / "ds.json")
    from gslearn.shadows import load_shadows_npz
    records = load_shadows_npz(tmp_path / "ds.shadows.npz")
    assert len(records) == 5
    assert records[0].n_rounds == 50


def test_product_density_distribution():
    cfg = ExperimentConfig(rows=1, cols=3, n_train=64, n_test=16, seed=4,
                           distribution="product",
                           density={"family": "linear", "slope": 1.0})
    ds = generate_dataset(cfg)
    u = (ds.x[:64] + 1.0) / 2.0
    # density 2u tilts mass toward 1
    assert u.mean() > 0.55


# -- training and evaluation -------------------------------------------------------


def test_mean_model(small_dataset):
    art = train_model(small_dataset, ModelConfig(kind="mean"))
    rows = evaluate(art, small_dataset, "test")
    assert aggregate_rmse(rows) > 0.0
    tr = small_dataset.train_idx
    k = 0
    assert art.models[art.observable_names[k]] == pytest.approx(
        small_dataset.y[tr, k].mean())


def test_ridge_on_constant_labels(small_dataset):
    ds = Dataset(small_dataset.meta, small_dataset.x,
                 np.full_like(small_dataset.y, -0.25),
                 small_dataset.energies, small_dataset.gaps,
                 small_dataset.degeneracies)
    art = train_model(ds, ModelConfig(kind="ridge", delta1=0.0,
                                      ridge_lambda=1e-9))
    assert aggregate_rmse(evaluate(art, ds, "test")) <= 1e-6


def test_lasso_full_shrink_matches_label_std(small_dataset):
    art = train_model(small_dataset, ModelConfig(kind="lasso", delta1=0.0,
                                                 lasso_mu=100.0))
    rows = evaluate(art, small_dataset, "test")
    got = aggregate_rmse(rows)
    te = small_dataset.test_idx
    # zero model predicts 0 everywhere
    expect = float(np.sqrt(np.mean(small_dataset.y[te] ** 2)))
    assert got == pytest.approx(expect, abs=1e-12)


def test_nn_smoke(small_dataset):
    nn = TrainConfig(width=8, depth=2, epochs=10, batch_size=8, seed=0)
    art = train_model(small_dataset, ModelConfig(kind="nn", delta1=0.0,
                                                 nn=nn))
    rows = evaluate(art, small_dataset, "test")
    agg = aggregate_rmse(rows)
    assert np.isfinite(agg)
    w_l1, theta_max = art.weight_summary()
    assert np.isfinite(w_l1) and np.isfinite(theta_max)


def test_evaluate_aggregate_definition(small_dataset):
    art = train_model(small_dataset, ModelConfig(kind="mean"))
    rows = evaluate(art, small_dataset, "test")
    per_obs = [r["rmse"] for r in rows if r["observable"] != "ALL"]
    agg = aggregate_rmse(rows)
    assert agg == pytest.approx(np.sqrt(np.mean(np.square(per_obs))),
                                abs=1e-12)


def test_results_csv_columns(tmp_path, small_dataset):
    art = train_model(small_dataset, ModelConfig(kind="mean"))
    rows = evaluate(art, small_dataset, "test")
    path = tmp_path / "res.csv"
    write_results_csv(rows, path)
    header = path.read_text().splitlines()[0]
    assert header == ",".join(RESULT_COLUMNS)


def test_artifact_save_load(tmp_path, small_dataset):
    for kind, extra in (("mean", {}), ("ridge", {"ridge_lambda": 1e-4}),
                        ("lasso", {"lasso_mu": 1e-2})):
        art = train_model(small_dataset,
                          ModelConfig(kind=kind, delta1=0.0, **extra))
        out = tmp_path / kind
        save_artifact(art, out)
        again = load_artifact(out)
        a = aggregate_rmse(evaluate(art, small_dataset, "test"))
        b = aggregate_rmse(evaluate(again, small_dataset, "test"))
        assert a == pytest.approx(b, abs=1e-12)


def test_nn_artifact_round_trip(tmp_path, small_dataset):
    nn = TrainConfig(width=8, depth=2, epochs=5, batch_size=8, seed=0)
    art = train_model(small_dataset, ModelConfig(kind="nn", delta1=0.0,
                                                 nn=nn))
    save_artifact(art, tmp_path / "nn")
    again = load_artifact(tmp_path / "nn")
    a = aggregate_rmse(evaluate(art, small_dataset, "test"))
    b = aggregate_rmse(evaluate(again, small_dataset, "test"))
    assert a == pytest.approx(b, abs=1e-12)


def test_rebuild_system(small_dataset):
    ham, obs = rebuild_system(small_dataset.meta)
    assert ham.m == small_dataset.x.shape[1]
    assert len(obs) == small_dataset.y.shape[1]


# -- scaling -------------------------------------------------------------------------


def test_scaling_structural(tmp_path):
    scfg = ScalingConfig(sizes=[(1, 2), (1, 3)], delta1_list=[0.0],
                         n_train_list=[8, 16], models=["mean", "ridge"],
                         n_test=8, seed=0, ridge_lambda=1e-4,
                         out_dir=str(tmp_path / "scaling"))
    rows = scaling_experiment(scfg)
    # 2 sizes x 2 n_train x 1 delta1 x 2 models x 2 splits
    agg_rows = [r for r in rows if r["observable"] == "ALL"]
    assert len(agg_rows) == 16
    out = tmp_path / "scaling"
    assert (out / "results.csv").exists()
    assert (out / "panel_size.csv").exists()
    assert (out / "panel_ntrain.csv").exists()
    assert (out / "panel_weights.csv").exists()
    header = (out / "panel_size.csv").read_text().splitlines()[0]
    assert header == "n_sites,delta1,model,test_rmse"


# -- CLI ------------------------------------------------------------------------------


def test_cli_gen_train_eval(tmp_path):
    ds_path = tmp_path / "ds.json"
    rc = cli_main(["gen-data", "--rows", "1", "--cols", "3",
                   "--n-train", "16", "--n-test", "8", "--seed", "2",
                   "--out", str(ds_path)])
    assert rc == 0
    assert ds_path.exists()
    art_dir = tmp_path / "ridge"
    rc = cli_main(["train", "--dataset", str(ds_path), "--model", "ridge",
                   "--delta1", "0.0", "--ridge-lambda", "1e-4",
                   "--out", str(art_dir)])
    assert rc == 0
    res = tmp_path / "res.csv"
    rc = cli_main(["eval", "--dataset", str(ds_path), "--artifact",
                   str(art_dir), "--split", "test", "--out", str(res)])
    assert rc == 0
    assert res.read_text().startswith(",".join(RESULT_COLUMNS))


def test_cli_qmc_diag(tmp_path):
    out = tmp_path / "qmc.json"
    rc = cli_main(["qmc-diag", "--n", "64", "--d", "2", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["dstar_exact"] is True
    assert all(v["holds"] for v in doc["koksma_hlawka"].values())


def test_cli_exit_codes(tmp_path):
    # capacity error -> 3
    rc = cli_main(["gen-data", "--rows", "5", "--cols", "5",
                   "--out", str(tmp_path / "x.json")])
    assert rc == 3
    # config error -> 2
    rc = cli_main(["gen-data", "--rows", "2", "--cols", "2",
                   "--distribution", "product",
                   "--out", str(tmp_path / "y.json")])
    assert rc == 2
    # unknown dataset schema -> 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": "nope"}))
    rc = cli_main(["train", "--dataset", str(bad), "--model", "mean",
                   "--out", str(tmp_path / "m")])
    assert rc == 2


def test_cli_entrypoint_subprocess(tmp_path):
    env = dict(os.environ)
    proc = subprocess.run(
        [sys.executable, "-m", "gslearn", "qmc-diag", "--n", "16",
         "--d", "1"], capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert "dstar_upper" in proc.stdout


def test_generation_failure_manifest(tmp_path, monkeypatch):
    import gslearn.harness as hz
    real = hz.ground_state
    calls = {"n": 0}

    def flaky(ham, x, cfg=None):
        calls["n"] += 1
        if calls["n"] == 3:
            raise RuntimeError("solver blew up")
        return real(ham, x, cfg)

    monkeypatch.setattr(hz, "ground_state", flaky)
    cfg = ExperimentConfig(rows=1, cols=2, n_train=4, n_test=2, seed=1)
    path = tmp_path / "ds.json"
    with pytest.raises(ConfigError):
        generate_dataset(cfg, out_path=path)
    manifest = json.loads(Path(str(path) + ".manifest.json").read_text())
    assert len(manifest["failed"]) == 1
    assert "solver blew up" in manifest["failed"][0]["error"]
    assert len(manifest["completed"]) == 5
