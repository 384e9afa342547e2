"""Per-Pauli local tanh networks combined by a trainable linear last layer.

The model is f(x) = sum_P w_P * mlp_P(x restricted to I_P), where each local
network applies the input rescaling u = (x+1)/2 followed by `depth` hidden
tanh layers of a common width and a final affine map to a scalar.  Training
minimizes mean squared error plus an l1 penalty on the last-layer weights w,
with AdamW (decoupled weight decay on the local-network parameters only) and
exact reverse-mode gradients.

For speed, local networks with the same input dimension are packed into
stacked weight tensors and evaluated with batched matmuls; the packed
arrays are the single source of truth, and per-Pauli views are materialized
on demand.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConvergenceError
from .lattice import PauliString

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    width: int = 64
    depth: int = 2                 # number of hidden tanh layers
    lambda_l1: float = 1e-3
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    weight_decay: float = 1e-4
    epochs: int = 300
    batch_size: int = 128
    seed: int = 0
    w_max_monitor: float = 100.0   # threshold reported against max|Theta|
    early_stop_patience: int = 20
    early_stop_delta: float = 1e-7
    l1_mode: str = "subgradient"   # "subgradient" | "proximal"
    dtype: str = "float64"         # float32 trades gradient fidelity for speed

    def __post_init__(self):
        if self.width < 1 or self.depth < 1:
            raise ValueError("width and depth must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0 or self.lambda_l1 < 0 or self.weight_decay < 0:
            raise ValueError("lr > 0, lambda_l1 >= 0, weight_decay >= 0")
        if self.l1_mode not in ("subgradient", "proximal"):
            raise ValueError("l1_mode must be 'subgradient' or 'proximal'")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be 'float64' or 'float32'")


class LocalMLP:
    """One local network: weights[k] of shape (out_k, in_k), zero-based.

    Layer shapes chain [d_in, W, ..., W, 1]; tanh on hidden layers only; the
    input preprocessor u = (x+1)/2 is applied before the first affine map.
    """

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        if len(weights) != len(biases):
            raise ValueError("one bias vector per weight matrix")
        for w, b in zip(weights, biases):
            if w.shape[0] != b.shape[0]:
                raise ValueError("bias length must match output dimension")
        for a, b in zip(weights[:-1], weights[1:]):
            if b.shape[1] != a.shape[0]:
                raise ValueError("layer shapes do not chain")
        if weights[-1].shape[0] != 1:
            raise ValueError("output layer must map to a scalar")
        self.weights = weights
        self.biases = biases

    @property
    def d_in(self) -> int:
        return self.weights[0].shape[1]

    def forward(self, x_local: np.ndarray) -> float:
        h = (np.asarray(x_local, dtype=float) + 1.0) / 2.0
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(w @ h + b)
        out = self.weights[-1] @ h + self.biases[-1]
        return float(out[0])


def xavier_limit(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def _xavier_mlp(d_in: int, width: int, depth: int,
                rng: np.random.Generator) -> LocalMLP:
    dims = [d_in] + [width] * depth + [1]
    weights, biases = [], []
    for a, b in zip(dims[:-1], dims[1:]):
        lim = xavier_limit(a, b)
        weights.append(rng.uniform(-lim, lim, size=(b, a)))
        biases.append(np.zeros(b))
    return LocalMLP(weights, biases)


@dataclass
class _Group:
    """Local networks sharing an input dimension, stacked for batched math."""

    members: list[int]            # positions into the model's pauli list
    coord_idx: np.ndarray         # (G, d) int, coordinates gathered per member
    weights: list[np.ndarray]     # (G, out, in) per layer; output layer (G, 1, W)
    biases: list[np.ndarray]      # (G, out) per layer


class CombinedModel:
    """sum_P w_P mlp_P(x[I_P]) over a fixed, ordered Pauli list."""

    def __init__(self, paulis, i_p, groups: list[_Group], w: np.ndarray,
                 width: int, depth: int, delta1: float):
        self.paulis = list(paulis)
        self.i_p = [tuple(ip) for ip in i_p]
        self.groups = groups
        self.w = w
        self.width = width
        self.depth = depth
        self.delta1 = delta1

    # -- construction -----------------------------------------------------

    @staticmethod
    def from_locals(paulis, i_p, locals_: list[LocalMLP], w: np.ndarray,
                    width: int, depth: int, delta1: float) -> "CombinedModel":
        by_dim: dict[int, list[int]] = {}
        for pos, mlp in enumerate(locals_):
            by_dim.setdefault(mlp.d_in, []).append(pos)
        groups = []
        for d in sorted(by_dim):
            members = by_dim[d]
            coord_idx = np.array([list(i_p[p]) for p in members],
                                 dtype=np.int64).reshape(len(members), d)
            weights, biases = [], []
            n_layers = depth + 1
            for k in range(n_layers):
                weights.append(np.stack([locals_[p].weights[k]
                                         for p in members]))
                biases.append(np.stack([locals_[p].biases[k]
                                        for p in members]))
            groups.append(_Group(members, coord_idx, weights, biases))
        return CombinedModel(paulis, i_p, groups, np.asarray(w, dtype=float),
                             width, depth, delta1)

    def local(self, position: int) -> LocalMLP:
        """Per-Pauli view of the packed parameters (copies)."""
        for g in self.groups:
            if position in g.members:
                i = g.members.index(position)
                return LocalMLP([w[i].copy() for w in g.weights],
                                [b[i].copy() for b in g.biases])
        raise IndexError(position)

    @property
    def n_paulis(self) -> int:
        return len(self.paulis)

    # -- evaluation --------------------------------------------------------

    def local_outputs(self, xs: np.ndarray):
        """(outputs (N, n_paulis), caches) for a batch of inputs.

        Group tensors are laid out (G, N, width) so every affine map is a
        BLAS matmul batched over the group axis.
        """
        dtype = self.w.dtype
        xs = np.atleast_2d(np.asarray(xs, dtype=dtype))
        n = xs.shape[0]
        outs = np.empty((n, self.n_paulis), dtype=dtype)
        caches = []
        for g in self.groups:
            u = (xs[:, g.coord_idx] + 1.0) / 2.0  # (N, G, d)
            u = np.ascontiguousarray(u.transpose(1, 0, 2))  # (G, N, d)
            hs = []
            h = np.tanh(u @ g.weights[0].transpose(0, 2, 1)
                        + g.biases[0][:, None, :])
            hs.append(h)
            for k in range(1, self.depth):
                h = np.tanh(h @ g.weights[k].transpose(0, 2, 1)
                            + g.biases[k][:, None, :])
                hs.append(h)
            out = (h * g.weights[-1][:, None, 0, :]).sum(-1) \
                + g.biases[-1][:, None, 0]                  # (G, N)
            outs[:, g.members] = out.T
            caches.append((u, hs))
        return outs, caches

    def forward_batch(self, xs: np.ndarray) -> np.ndarray:
        outs, _ = self.local_outputs(xs)
        return outs @ self.w

    def forward(self, x: np.ndarray) -> float:
        return float(self.forward_batch(np.asarray(x)[None, :])[0])

    # -- parameter tree ----------------------------------------------------

    def param_leaves(self) -> list[np.ndarray]:
        """Local-network parameters (Theta), deterministic order."""
        leaves = []
        for g in self.groups:
            for w, b in zip(g.weights, g.biases):
                leaves.append(w)
                leaves.append(b)
        return leaves

    def max_abs_theta(self) -> float:
        return max(float(np.abs(l).max()) for l in self.param_leaves())

    def copy(self) -> "CombinedModel":
        groups = [
            _Group(list(g.members), g.coord_idx.copy(),
                   [w.copy() for w in g.weights],
                   [b.copy() for b in g.biases])
            for g in self.groups
        ]
        return CombinedModel(self.paulis, self.i_p, groups, self.w.copy(),
                             self.width, self.depth, self.delta1)

    def astype(self, dtype) -> "CombinedModel":
        groups = [
            _Group(list(g.members), g.coord_idx.copy(),
                   [w.astype(dtype) for w in g.weights],
                   [b.astype(dtype) for b in g.biases])
            for g in self.groups
        ]
        return CombinedModel(self.paulis, self.i_p, groups,
                             self.w.astype(dtype), self.width, self.depth,
                             self.delta1)


def init_model(paulis, i_p, cfg: TrainConfig, seed: int | None = None,
               delta1: float = 0.0) -> CombinedModel:
    """Xavier-uniform local weights, zero biases, zero last layer.

    Draws happen in Pauli order with a single seeded generator, so the
    result is bitwise reproducible and independent of group packing.
    """
    if len(paulis) != len(i_p):
        raise ValueError("one coordinate set per Pauli")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    locals_ = [_xavier_mlp(len(ip), cfg.width, cfg.depth, rng) for ip in i_p]
    w = np.zeros(len(paulis))
    return CombinedModel.from_locals(paulis, i_p, locals_, w,
                                     cfg.width, cfg.depth, delta1=delta1)


def forward(model: CombinedModel, x: np.ndarray) -> float:
    """Module-level alias for :meth:`CombinedModel.forward`."""
    return model.forward(x)


# ---------------------------------------------------------------------------
# Loss and gradients
# ---------------------------------------------------------------------------


@dataclass
class Gradients:
    groups: list[tuple[list[np.ndarray], list[np.ndarray]]]
    w: np.ndarray

    def leaves(self) -> list[np.ndarray]:
        out = []
        for ws, bs in self.groups:
            for w, b in zip(ws, bs):
                out.append(w)
                out.append(b)
        return out


def loss_and_grad(model: CombinedModel, xs: np.ndarray, ys: np.ndarray,
                  lambda_l1: float, include_l1_grad: bool = True):
    """Training objective and exact reverse-mode gradients on a batch.

    The objective is mean((f - y)^2) + lambda_l1 * ||w||_1; the subgradient
    of |w_P| at zero is taken as 0.  ``include_l1_grad=False`` leaves the l1
    term out of the gradient (used by the proximal update).
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=model.w.dtype))
    ys = np.asarray(ys, dtype=model.w.dtype)
    if ys.shape != (xs.shape[0],):
        raise ValueError("one label per input row")
    n = xs.shape[0]
    outs, caches = model.local_outputs(xs)
    f = outs @ model.w
    resid = f - ys
    mse = float(np.mean(resid**2))
    loss = mse + lambda_l1 * float(np.abs(model.w).sum())

    df = (2.0 / n) * resid                      # dLoss/df, (N,)
    dw = outs.T @ df
    if include_l1_grad and lambda_l1 > 0:
        dw = dw + lambda_l1 * np.sign(model.w)
    grad_groups = []
    for g, (u, hs) in zip(model.groups, caches):
        dout = model.w[g.members][:, None] * df[None, :]   # (G, N)
        wout = g.weights[-1][:, 0, :]                      # (G, W)
        d_wout = (dout[:, None, :] @ hs[-1])               # (G, 1, W)
        d_bout = dout.sum(axis=1)[:, None]
        dh = dout[:, :, None] * wout[:, None, :]           # (G, N, W)
        d_ws = [d_wout]
        d_bs = [d_bout]
        for k in range(model.depth - 1, 0, -1):
            da = dh * (1.0 - hs[k] ** 2)
            d_ws.append(da.transpose(0, 2, 1) @ hs[k - 1])
            d_bs.append(da.sum(axis=1))
            dh = da @ g.weights[k]
        da0 = dh * (1.0 - hs[0] ** 2)
        d_ws.append(da0.transpose(0, 2, 1) @ u)
        d_bs.append(da0.sum(axis=1))
        d_ws.reverse()
        d_bs.reverse()
        grad_groups.append((d_ws, d_bs))
    return loss, Gradients(grad_groups, dw)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainTrace:
    objective: list[float] = field(default_factory=list)
    mse: list[float] = field(default_factory=list)
    w_l1: list[float] = field(default_factory=list)
    theta_max: list[float] = field(default_factory=list)
    epochs_run: int = 0
    stopped_early: bool = False
    wall_time_s: float = 0.0
    w_max_exceeded: bool = False

    def summary(self) -> dict:
        return {
            "final_objective": self.objective[-1] if self.objective else None,
            "final_mse": self.mse[-1] if self.mse else None,
            "final_w_l1": self.w_l1[-1] if self.w_l1 else None,
            "final_theta_max": self.theta_max[-1] if self.theta_max else None,
            "epochs_run": self.epochs_run,
            "stopped_early": self.stopped_early,
            "wall_time_s": self.wall_time_s,
            "w_max_exceeded": self.w_max_exceeded,
        }


class _AdamState:
    def __init__(self, leaves):
        self.m = [np.zeros_like(l) for l in leaves]
        self.v = [np.zeros_like(l) for l in leaves]
        self.t = 0


def _adam_update(leaves, grads, state, lr, betas, eps, weight_decay):
    b1, b2 = betas
    state.t += 1
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for leaf, g, m, v in zip(leaves, grads, state.m, state.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        step = (m / c1) / (np.sqrt(v / c2) + eps)
        if weight_decay:
            step = step + weight_decay * leaf
        leaf -= lr * step


def train(model: CombinedModel, xs: np.ndarray, ys: np.ndarray,
          cfg: TrainConfig):
    """AdamW training; returns (trained model, trace).

    Weight decay is decoupled and applies to the local-network parameters
    only; the l1 term on w is handled by subgradient inside the loss (or by
    a proximal step when cfg.l1_mode == "proximal").
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.asarray(ys, dtype=float)
    if xs.shape[0] == 0:
        raise ValueError("dataset must be nonempty")
    model = model.copy()
    if cfg.dtype == "float32":
        model = model.astype(np.float32)
        xs = xs.astype(np.float32)
        ys = ys.astype(np.float32)
    n = xs.shape[0]
    rng = np.random.default_rng(cfg.seed)
    theta_state = _AdamState(model.param_leaves())
    w_state = _AdamState([model.w])
    use_prox = cfg.l1_mode == "proximal"

    trace = TrainTrace()
    t0 = time.perf_counter()
    best = np.inf
    since_best = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            rows = perm[lo:lo + cfg.batch_size]
            loss, grads = loss_and_grad(model, xs[rows], ys[rows],
                                        cfg.lambda_l1,
                                        include_l1_grad=not use_prox)
            if not np.isfinite(loss):
                trace.wall_time_s = time.perf_counter() - t0
                raise ConvergenceError("training diverged (non-finite loss)",
                                       details={"trace": trace.summary(),
                                                "epoch": epoch})
            _adam_update(model.param_leaves(), grads.leaves(), theta_state,
                         cfg.lr, cfg.betas, cfg.adam_eps, cfg.weight_decay)
            _adam_update([model.w], [grads.w], w_state,
                         cfg.lr, cfg.betas, cfg.adam_eps, 0.0)
            if use_prox and cfg.lambda_l1 > 0:
                np.multiply(np.sign(model.w),
                            np.maximum(np.abs(model.w)
                                       - cfg.lr * cfg.lambda_l1, 0.0),
                            out=model.w)
        obj, _grads_unused = _objective_only(model, xs, ys, cfg.lambda_l1)
        if not np.isfinite(obj):
            trace.wall_time_s = time.perf_counter() - t0
            raise ConvergenceError("training diverged (non-finite loss)",
                                   details={"trace": trace.summary(),
                                            "epoch": epoch})
        trace.objective.append(obj)
        trace.mse.append(obj - cfg.lambda_l1 * float(np.abs(model.w).sum()))
        trace.w_l1.append(float(np.abs(model.w).sum()))
        trace.theta_max.append(model.max_abs_theta())
        trace.epochs_run = epoch + 1
        if obj < best - cfg.early_stop_delta:
            best = obj
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.early_stop_patience:
                trace.stopped_early = True
                break
    trace.wall_time_s = time.perf_counter() - t0
    trace.w_max_exceeded = trace.theta_max[-1] > cfg.w_max_monitor
    if trace.objective[-1] > trace.objective[0] and len(trace.objective) > 1:
        raise ConvergenceError(
            "final objective above the initial objective",
            details={"trace": trace.summary()})
    return model, trace


def _objective_only(model, xs, ys, lambda_l1):
    f = model.forward_batch(xs)
    obj = float(np.mean((f - ys) ** 2)) \
        + lambda_l1 * float(np.abs(model.w).sum())
    return obj, None


def weight_report(model: CombinedModel) -> tuple[float, float]:
    """(l1 norm of the last layer, largest |parameter| in the local nets)."""
    return float(np.abs(model.w).sum()), model.max_abs_theta()


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------


def checkpoint_to_json(model: CombinedModel, cfg: TrainConfig | None = None,
                       trace: TrainTrace | None = None) -> str:
    locals_doc = []
    for pos in range(model.n_paulis):
        mlp = model.local(pos)
        locals_doc.append({
            "weights": [w.tolist() for w in mlp.weights],
            "biases": [b.tolist() for b in mlp.biases],
        })
    doc = {
        "version": CHECKPOINT_VERSION,
        "width": model.width,
        "depth": model.depth,
        "delta1": model.delta1,
        "paulis": [[list(f) for f in p.factors] for p in model.paulis],
        "i_p": [list(ip) for ip in model.i_p],
        "w": model.w.tolist(),
        "locals": locals_doc,
        "config": asdict(cfg) if cfg is not None else None,
        "trace_summary": trace.summary() if trace is not None else None,
    }
    return json.dumps(doc, sort_keys=True)


def checkpoint_from_json(text: str) -> CombinedModel:
    doc = json.loads(text)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version "
                         f"{doc.get('version')!r}")
    paulis = [PauliString(tuple((int(s), l) for s, l in fac))
              for fac in doc["paulis"]]
    i_p = [tuple(int(c) for c in ip) for ip in doc["i_p"]]
    locals_ = [
        LocalMLP([np.array(w, dtype=float) for w in entry["weights"]],
                 [np.array(b, dtype=float) for b in entry["biases"]])
        for entry in doc["locals"]
    ]
    return CombinedModel.from_locals(
        paulis, i_p, locals_, np.array(doc["w"], dtype=float),
        width=int(doc["width"]), depth=int(doc["depth"]),
        delta1=float(doc["delta1"]))
