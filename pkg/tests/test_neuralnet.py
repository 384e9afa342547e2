"""Local tanh networks: forward oracles, exact gradients, training."""

import numpy as np
import pytest

from gslearn.errors import ConvergenceError
from gslearn.lattice import (PauliString, build_heisenberg,
                             enumerate_geo_paulis, local_coordinates)
from gslearn.neuralnet import (CombinedModel, LocalMLP, TrainConfig,
                               checkpoint_from_json, checkpoint_to_json,
                               init_model, loss_and_grad, train,
                               weight_report, xavier_limit)


@pytest.fixture(scope="module")
def small_system():
    ham, obs = build_heisenberg(1, 3)
    geo = enumerate_geo_paulis(ham.lattice, 1, 2)[:6]
    i_p = [local_coordinates(p, ham, 0.0) for p in geo]
    return ham, geo, i_p


def _rand_model(geo, i_p, cfg, seed, w_scale=0.5):
    model = init_model(geo, i_p, cfg, seed=seed)
    rng = np.random.default_rng(seed + 1)
    model.w[:] = w_scale * rng.standard_normal(len(geo))
    return model


# -- construction ---------------------------------------------------------------


def test_init_deterministic(small_system):
    _, geo, i_p = small_system
    cfg = TrainConfig(width=8, depth=2)
    a = init_model(geo, i_p, cfg, seed=5)
    b = init_model(geo, i_p, cfg, seed=5)
    for la, lb in zip(a.param_leaves(), b.param_leaves()):
        assert np.array_equal(la, lb)
    c = init_model(geo, i_p, cfg, seed=6)
    assert any(not np.array_equal(la, lc)
               for la, lc in zip(a.param_leaves(), c.param_leaves()))


def test_init_zero_last_layer_gives_zero_output(small_system):
    _, geo, i_p = small_system
    model = init_model(geo, i_p, TrainConfig(width=8, depth=2), seed=0)
    rng = np.random.default_rng(0)
    xs = rng.uniform(-1, 1, (5, 2))
    assert np.allclose(model.forward_batch(xs), 0.0)


def test_xavier_bounds(small_system):
    _, geo, i_p = small_system
    cfg = TrainConfig(width=16, depth=3)
    model = init_model(geo, i_p, cfg, seed=2)
    for pos in range(len(geo)):
        mlp = model.local(pos)
        for w in mlp.weights:
            fan_out, fan_in = w.shape
            assert np.abs(w).max() <= xavier_limit(fan_in, fan_out) + 1e-15
        for b in mlp.biases:
            assert np.allclose(b, 0.0)


def test_zero_parameters_forward_zero():
    mlp = LocalMLP(
        [np.zeros((4, 2)), np.zeros((4, 4)), np.zeros((1, 4))],
        [np.zeros(4), np.zeros(4), np.zeros(1)])
    assert mlp.forward(np.array([0.3, -0.7])) == 0.0


def test_local_mlp_shape_validation():
    with pytest.raises(ValueError):
        LocalMLP([np.zeros((4, 2)), np.zeros((1, 3))],
                 [np.zeros(4), np.zeros(1)])  # 4 -> 3 mismatch
    with pytest.raises(ValueError):
        LocalMLP([np.zeros((4, 2)), np.zeros((2, 4))],
                 [np.zeros(4), np.zeros(2)])  # output not scalar


def test_hand_computed_tanh_composition():
    # 1 input, width 1, two hidden layers; tau^{-1}(x) = (x+1)/2
    w_in, b_in = np.array([[2.0]]), np.array([0.1])
    w_h, b_h = np.array([[-1.5]]), np.array([0.2])
    w_out, b_out = np.array([[3.0]]), np.array([-0.4])
    mlp = LocalMLP([w_in, w_h, w_out], [b_in, b_h, b_out])
    x = 0.6
    u = (x + 1) / 2
    expected = 3.0 * np.tanh(-1.5 * np.tanh(2.0 * u + 0.1) + 0.2) - 0.4
    assert mlp.forward(np.array([x])) == pytest.approx(expected, abs=1e-14)


def test_combined_forward_matches_local_sum(small_system):
    _, geo, i_p = small_system
    cfg = TrainConfig(width=8, depth=2)
    model = _rand_model(geo, i_p, cfg, seed=3)
    rng = np.random.default_rng(4)
    x = rng.uniform(-1, 1, 2)
    expected = sum(model.w[pos] * model.local(pos).forward(x[list(ip)])
                   for pos, ip in enumerate(i_p))
    assert model.forward(x) == pytest.approx(expected, abs=1e-12)


def test_last_layer_linearity(small_system):
    _, geo, i_p = small_system
    model = _rand_model(geo, i_p, TrainConfig(width=8, depth=2), seed=5)
    x = np.random.default_rng(6).uniform(-1, 1, 2)
    f1 = model.forward(x)
    model2 = model.copy()
    model2.w *= 2.0
    assert model2.forward(x) == pytest.approx(2.0 * f1, abs=1e-12)


# -- gradients --------------------------------------------------------------------


def test_gradient_against_central_differences(small_system):
    _, geo, i_p = small_system
    cfg = TrainConfig(width=16, depth=2)
    rng = np.random.default_rng(11)
    checked = 0
    worst = 0.0
    for draw in range(10):
        model = _rand_model(geo, i_p, cfg, seed=100 + draw)
        xs = rng.uniform(-1, 1, (4, 2))
        ys = rng.uniform(-1, 1, 4)
        lam = 1e-2
        _, grads = loss_and_grad(model, xs, ys, lam)
        leaves = model.param_leaves() + [model.w]
        gleaves = grads.leaves() + [grads.w]
        h = 1e-5
        for leaf, g in zip(leaves, gleaves):
            flat = leaf.reshape(-1)
            gflat = g.reshape(-1)
            for j in rng.choice(flat.size, size=min(2, flat.size),
                                replace=False):
                old = flat[j]
                flat[j] = old + h
                lp, _ = loss_and_grad(model, xs, ys, lam)
                flat[j] = old - h
                lm, _ = loss_and_grad(model, xs, ys, lam)
                flat[j] = old
                fd = (lp - lm) / (2 * h)
                denom = max(abs(fd), abs(gflat[j]), 1e-8)
                worst = max(worst, abs(fd - gflat[j]) / denom)
                checked += 1
    assert checked >= 100
    assert worst <= 1e-5


def test_zero_model_zero_labels(small_system):
    _, geo, i_p = small_system
    model = init_model(geo, i_p, TrainConfig(width=4, depth=2), seed=0)
    xs = np.zeros((3, 2))
    loss, grads = loss_and_grad(model, xs, np.zeros(3), 0.0)
    assert loss == 0.0
    assert np.allclose(grads.w, 0.0)
    # local parameters receive no gradient through the zero last layer
    assert all(np.allclose(g, 0.0) for g in grads.leaves())


def test_lambda_zero_equals_pure_mse(small_system):
    _, geo, i_p = small_system
    model = _rand_model(geo, i_p, TrainConfig(width=8, depth=2), seed=7)
    rng = np.random.default_rng(8)
    xs = rng.uniform(-1, 1, (6, 2))
    ys = rng.uniform(-1, 1, 6)
    loss0, _ = loss_and_grad(model, xs, ys, 0.0)
    mse = float(np.mean((model.forward_batch(xs) - ys) ** 2))
    assert loss0 == pytest.approx(mse, abs=1e-12)


def test_l1_subgradient_zero_at_zero(small_system):
    _, geo, i_p = small_system
    model = init_model(geo, i_p, TrainConfig(width=4, depth=2), seed=1)
    model.w[:] = 0.0
    xs = np.random.default_rng(2).uniform(-1, 1, (4, 2))
    ys = np.zeros(4)
    _, grads = loss_and_grad(model, xs, ys, 10.0)
    assert np.allclose(grads.w, 0.0)


# -- locality and permutation -------------------------------------------------------


def test_locality_exact_invariance():
    ham, _ = build_heisenberg(2, 3)
    geo = enumerate_geo_paulis(ham.lattice, 1, 2)[:4]
    i_p = [local_coordinates(p, ham, 0.0) for p in geo]
    cfg = TrainConfig(width=8, depth=2)
    model = _rand_model(geo, i_p, cfg, seed=9)
    used = sorted(set(c for ip in i_p for c in ip))
    unused = [c for c in range(ham.m) if c not in used]
    assert unused, "test needs at least one untouched coordinate"
    rng = np.random.default_rng(10)
    x = rng.uniform(-1, 1, ham.m)
    base = model.forward(x)
    for c in unused:
        x2 = x.copy()
        x2[c] = rng.uniform(-1, 1)
        assert model.forward(x2) == base  # bitwise equal


def test_permutation_invariance(small_system):
    _, geo, i_p = small_system
    cfg = TrainConfig(width=8, depth=2)
    model = _rand_model(geo, i_p, cfg, seed=12)
    perm = [3, 0, 5, 1, 4, 2]
    locals_perm = [model.local(p) for p in perm]
    model_perm = CombinedModel.from_locals(
        [geo[p] for p in perm], [i_p[p] for p in perm], locals_perm,
        model.w[perm], width=cfg.width, depth=cfg.depth, delta1=0.0)
    xs = np.random.default_rng(13).uniform(-1, 1, (8, 2))
    assert np.allclose(model.forward_batch(xs),
                       model_perm.forward_batch(xs), atol=1e-12)


def test_output_bound(small_system):
    _, geo, i_p = small_system
    model = _rand_model(geo, i_p, TrainConfig(width=8, depth=2), seed=14)
    bound = 0.0
    for pos in range(len(geo)):
        mlp = model.local(pos)
        local_bound = np.abs(mlp.weights[-1]).sum() + abs(mlp.biases[-1][0])
        bound = max(bound, local_bound)
    bound *= np.abs(model.w).sum()
    xs = np.random.default_rng(15).uniform(-1, 1, (50, 2))
    assert np.abs(model.forward_batch(xs)).max() <= bound + 1e-12


# -- training ---------------------------------------------------------------------


def test_train_constant_labels(small_system):
    _, geo, i_p = small_system
    cfg = TrainConfig(width=8, depth=2, epochs=200, batch_size=16,
                      lr=3e-3, lambda_l1=0.0, seed=3)
    model = init_model(geo, i_p, cfg, seed=3)
    rng = np.random.default_rng(4)
    xs = rng.uniform(-1, 1, (32, 2))
    ys = np.full(32, -0.5)
    trained, trace = train(model, xs, ys, cfg)
    assert trace.mse[-1] <= 1e-4


def test_train_final_not_above_initial(small_system):
    _, geo, i_p = small_system
    cfg = TrainConfig(width=8, depth=2, epochs=30, batch_size=8, seed=5)
    model = init_model(geo, i_p, cfg, seed=5)
    rng = np.random.default_rng(6)
    xs = rng.uniform(-1, 1, (24, 2))
    ys = rng.uniform(-1, 0, 24)
    _, trace = train(model, xs, ys, cfg)
    assert trace.objective[-1] <= trace.objective[0]


def test_train_seed_reproducible(small_system):
    _, geo, i_p = small_system
    cfg = TrainConfig(width=8, depth=2, epochs=15, batch_size=8, seed=9)
    xs = np.random.default_rng(7).uniform(-1, 1, (20, 2))
    ys = np.random.default_rng(8).uniform(-1, 0, 20)
    m1, _ = train(init_model(geo, i_p, cfg, seed=9), xs, ys, cfg)
    m2, _ = train(init_model(geo, i_p, cfg, seed=9), xs, ys, cfg)
    for a, b in zip(m1.param_leaves() + [m1.w], m2.param_leaves() + [m2.w]):
        assert np.array_equal(a, b)


def test_train_divergence_raises(small_system):
    _, geo, i_p = small_system
    cfg = TrainConfig(width=8, depth=2, epochs=50, batch_size=8, lr=1e9,
                      seed=1)
    model = _rand_model(geo, i_p, cfg, seed=1, w_scale=5.0)
    xs = np.random.default_rng(2).uniform(-1, 1, (16, 2))
    ys = 100.0 * np.ones(16)
    with pytest.raises(ConvergenceError):
        train(model, xs, ys, cfg)


def test_proximal_mode_produces_exact_zeros():
    # with lr*lambda above the Adam step size the soft-threshold pins w at 0
    geo = [PauliString.from_map({0: "X"}), PauliString.from_map({2: "X"})]
    i_p = [(0,), (1,)]
    xs = np.random.default_rng(3).uniform(-1, 1, (32, 2))
    ys = 0.5 * xs[:, 0]
    cfg = TrainConfig(width=8, depth=2, epochs=30, batch_size=16,
                      lambda_l1=2.0, l1_mode="proximal", seed=2)
    trained, _ = train(init_model(geo, i_p, cfg, seed=2), xs, ys, cfg)
    assert (trained.w == 0.0).all()
    free = TrainConfig(width=8, depth=2, epochs=30, batch_size=16,
                       lambda_l1=0.0, l1_mode="proximal", seed=2)
    trained, _ = train(init_model(geo, i_p, free, seed=2), xs, ys, free)
    assert np.abs(trained.w).sum() > 0.0


def test_weight_report(small_system):
    _, geo, i_p = small_system
    model = init_model(geo, i_p, TrainConfig(width=8, depth=2), seed=0)
    l1, theta = weight_report(model)
    assert l1 == 0.0
    flat_max = max(np.abs(l).max() for l in model.param_leaves())
    assert theta == pytest.approx(flat_max)
    model.w[:2] = [0.5, -0.5]
    assert weight_report(model)[0] == pytest.approx(1.0)


def test_weight_report_flatten_oracle(small_system):
    _, geo, i_p = small_system
    model = _rand_model(geo, i_p, TrainConfig(width=8, depth=2), seed=21)
    all_params = []
    for pos in range(len(geo)):
        mlp = model.local(pos)
        for w in mlp.weights:
            all_params.append(w.ravel())
        for b in mlp.biases:
            all_params.append(b.ravel())
    oracle = np.abs(np.concatenate(all_params)).max()
    assert weight_report(model)[1] == pytest.approx(oracle)


# -- checkpointing ------------------------------------------------------------------


def test_checkpoint_round_trip(small_system):
    _, geo, i_p = small_system
    cfg = TrainConfig(width=8, depth=2)
    model = _rand_model(geo, i_p, cfg, seed=17)
    text = checkpoint_to_json(model, cfg)
    again = checkpoint_from_json(text)
    xs = np.random.default_rng(18).uniform(-1, 1, (6, 2))
    assert np.allclose(model.forward_batch(xs), again.forward_batch(xs),
                       atol=1e-15)
    import json as _json
    doc = _json.loads(text)
    doc["version"] = 99
    with pytest.raises(ValueError):
        checkpoint_from_json(_json.dumps(doc))


def test_float32_training_runs(small_system):
    _, geo, i_p = small_system
    cfg = TrainConfig(width=8, depth=2, epochs=10, batch_size=8, seed=4,
                      dtype="float32")
    model = init_model(geo, i_p, cfg, seed=4)
    xs = np.random.default_rng(5).uniform(-1, 1, (16, 2))
    ys = np.random.default_rng(6).uniform(-1, 0, 16)
    trained, trace = train(model, xs, ys, cfg)
    assert trained.w.dtype == np.float32
    assert np.isfinite(trace.objective[-1])
    preds = trained.forward_batch(xs)
    assert preds.dtype == np.float32
