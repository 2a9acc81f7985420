"""Losses, analytic gradients, Adam, and training loops for gate networks."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import BinarizedDataset, synth_truth_table
from .discrete import accuracy as circuit_accuracy
from .gates import TRUTH_TABLES, GateKind
from .network import (
    RealNetwork,
    discretize_network,
    forward_layers,
    lgn_soft_tables,
    single_neuron_network,
    softmax,
)

LOSS_KINDS = ("ce", "bce")
BCE_CLAMP = 1e-12


@dataclass
class TrainSpec:
    epochs: int = 200
    batch_size: int = 100
    loss_kind: str = "ce"
    #: readout temperature; ``None`` means sqrt(group size)
    tau: float | None = None
    lr: float = 0.01
    shuffle_seed: int = 0
    max_iterations: int | None = None
    eval_every: int = 1
    #: keep the parameters of the epoch with the best validation accuracy
    select_best: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")

    def resolved_tau(self, output_width: int, class_count: int) -> float:
        if self.tau is not None:
            return float(self.tau)
        return math.sqrt(output_width // class_count)


# -- losses -------------------------------------------------------------------


def loss(scores, label: int, kind: str = "ce", tau: float = 1.0) -> float:
    """Loss of one example: softmax cross-entropy of ``scores / tau``, or BCE.

    For ``bce`` the single score is a probability and ``label`` the target bit.
    """
    s = np.atleast_1d(np.asarray(scores, dtype=np.float64))
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if kind == "ce":
        return float(ce_loss(s[None, :] / tau, np.array([label]))[0])
    if kind == "bce":
        if s.size != 1:
            raise ValueError("bce takes a single probability")
        return float(bce_loss(s, np.array([label], dtype=np.float64))[0])
    raise ValueError(f"unknown loss kind {kind!r}")


def ce_loss(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient with respect to ``logits``."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    value = -float(logp[np.arange(n), y].mean())
    grad = np.exp(logp)
    grad[np.arange(n), y] -= 1.0
    return value, grad / n


def bce_loss(p: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy of probabilities ``p`` against bits ``t``."""
    pc = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    value = -float(np.mean(t * np.log(pc) + (1.0 - t) * np.log(1.0 - pc)))
    grad = (pc - t) / (pc * (1.0 - pc)) / p.size
    grad = np.where((p > BCE_CLAMP) & (p < 1.0 - BCE_CLAMP), grad, 0.0)
    return value, grad


def group_sum(out: np.ndarray, class_count: int) -> np.ndarray:
    n, width = out.shape
    if width % class_count:
        raise ValueError(f"output width {width} is not divisible by {class_count} classes")
    return out.reshape(n, class_count, width // class_count).sum(axis=2)


# -- backward -----------------------------------------------------------------


def output_loss(net: RealNetwork, out: np.ndarray, y: np.ndarray, kind: str, tau: float):
    """Loss and gradient with respect to the final activations."""
    if kind == "bce":
        t = np.asarray(y, dtype=np.float64).reshape(out.shape)
        return bce_loss(out, t)
    k = net.config.class_count
    value, dlogits = ce_loss(group_sum(out, k) / tau, np.asarray(y, dtype=np.int64))
    g = out.shape[1] // k
    return value, np.repeat(dlogits / tau, g, axis=1)


def _scatter_columns(n_cols: int, idx: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Sum ``values[:, j]`` into column ``idx[j]`` of a (batch, n_cols) array."""
    rows = values.shape[0]
    flat = (np.arange(rows)[:, None] * n_cols + idx[None, :]).ravel()
    return np.bincount(flat, weights=values.ravel(), minlength=rows * n_cols).reshape(rows, n_cols)


def backward(net: RealNetwork, x, y, kind: str = "ce", tau: float = 1.0):
    """Loss and exact gradients for every neuron parameter, layer by layer.

    LNN: with ``s = c(1 - c)``, ``dc/dw = s * (a, b, ab, 1)`` and
    ``dc/da = s * (w1 + w3 b)``. LGN: with corner weights ``phi`` and soft truth
    table ``q = softmax(z) @ T``, ``dc/dq = phi`` and ``dL/dz = p * (g - p.g)``.
    Gradients reaching a neuron through several consumers are summed.
    """
    acts = forward_layers(net, x)
    value, dout = output_loss(net, acts[-1], y, kind, tau)
    grads: list[np.ndarray] = [None] * len(net.params)  # type: ignore[list-item]
    for layer in range(len(net.params) - 1, -1, -1):
        h = acts[layer]
        lo, hi = net.wiring.left[layer], net.wiring.right[layer]
        a, b = h[:, lo], h[:, hi]
        w = net.params[layer]
        if net.kind == "lnn":
            c = acts[layer + 1]
            dz = dout * c * (1.0 - c)
            ab = a * b
            grads[layer] = np.stack(
                [(dz * a).sum(0), (dz * b).sum(0), (dz * ab).sum(0), dz.sum(0)], axis=1
            )
            da = dz * (w[:, 0] + w[:, 2] * b)
            db = dz * (w[:, 1] + w[:, 2] * a)
        else:
            p, q = lgn_soft_tables(w)
            na, nb = 1.0 - a, 1.0 - b
            dq = np.stack(
                [(dout * na * nb).sum(0), (dout * na * b).sum(0),
                 (dout * a * nb).sum(0), (dout * a * b).sum(0)], axis=1
            )
            dp = dq @ TRUTH_TABLES.T.astype(np.float64)
            grads[layer] = p * (dp - (p * dp).sum(axis=1, keepdims=True))
            da = dout * (nb * (q[:, 2] - q[:, 0]) + b * (q[:, 3] - q[:, 1]))
            db = dout * (na * (q[:, 1] - q[:, 0]) + a * (q[:, 3] - q[:, 2]))
        if layer:
            m = h.shape[1]
            dout = _scatter_columns(m, lo, da) + _scatter_columns(m, hi, db)
    return value, grads


def loss_value(net: RealNetwork, x, y, kind: str = "ce", tau: float = 1.0) -> float:
    return output_loss(net, forward_layers(net, x)[-1], y, kind, tau)[0]


def grad_check(net: RealNetwork, x, y, epsilon: float = 1e-5, kind: str = "ce",
               tau: float = 1.0, floor: float = 1e-6) -> float:
    """Largest relative gap between :func:`backward` and central differences.

    The relative error is ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``;
    ``floor`` keeps parameters with vanishing gradients from dividing by zero.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    _, grads = backward(net, x, y, kind, tau)
    probe = net.copy()
    worst = 0.0
    for layer, p in enumerate(probe.params):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + epsilon
            up = loss_value(probe, x, y, kind, tau)
            p[idx] = orig - epsilon
            down = loss_value(probe, x, y, kind, tau)
            p[idx] = orig
            numeric = (up - down) / (2 * epsilon)
            analytic = grads[layer][idx]
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
            worst = max(worst, err)
    return worst


# -- Adam ---------------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ValueError("gradient shapes do not match parameters")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    # g * g may overflow for absurd gradients; v = inf then just stalls the step
    with np.errstate(over="ignore", invalid="ignore"):
        for p, g, m, v in zip(params, grads, state.m, state.v):
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * (g * g)
            p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params


# -- training loop ------------------------------------------------------------


@dataclass
class TrainResult:
    net: RealNetwork
    history: list[dict]

    @property
    def final(self) -> dict:
        return self.history[-1] if self.history else {}


def real_accuracy(net: RealNetwork, x, y) -> float:
    out = forward_layers(net, x)[-1]
    pred = np.argmax(group_sum(out, net.config.class_count), axis=1)
    return float(np.mean(pred == np.asarray(y)))


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def train(net: RealNetwork, dataset: BinarizedDataset, spec: TrainSpec,
          test: BinarizedDataset | None = None,
          val: BinarizedDataset | None = None) -> TrainResult:
    """Mini-batch Adam on group-sum readout; ``net`` is updated in place.

    With a ``val`` set and ``spec.select_best``, the network ends up holding
    the parameters from the evaluated epoch with the highest discretized
    validation accuracy (earliest on ties). ``test`` is only ever reported.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    x = dataset.x.astype(np.float64)
    y = dataset.y
    tau = spec.resolved_tau(net.config.neurons_per_layer, net.config.class_count)
    state = AdamState(lr=spec.lr)
    history: list[dict] = []
    best = (-1.0, 0, None)
    step = 0
    for epoch in range(1, spec.epochs + 1):
        order = epoch_order(len(dataset), spec.shuffle_seed, epoch)
        total, seen = 0.0, 0
        for start in range(0, order.size, spec.batch_size):
            idx = order[start:start + spec.batch_size]
            value, grads = backward(net, x[idx], y[idx], spec.loss_kind, tau)
            adam_step(state, net.params, grads)
            total += value * idx.size
            seen += idx.size
            step += 1
            if spec.max_iterations is not None and step >= spec.max_iterations:
                break
        done = spec.max_iterations is not None and step >= spec.max_iterations
        if epoch % spec.eval_every == 0 or epoch == spec.epochs or done:
            rec = _epoch_record(net, epoch, step, total / seen, dataset, test, val)
            history.append(rec)
            if val is not None and rec["val_discrete_acc"] > best[0]:
                best = (rec["val_discrete_acc"], epoch, [p.copy() for p in net.params])
        if done:
            break
    if spec.select_best and best[2] is not None:
        net.params[:] = best[2]
        history.append(_selected_record(history, best[1]))
    return TrainResult(net, history)


def _selected_record(history: list[dict], epoch: int) -> dict:
    rec = dict(next(r for r in history if r["epoch"] == epoch))
    rec["selected"] = True
    return rec


def _epoch_record(net, epoch, step, mean_loss, train_ds, test_ds, val_ds=None) -> dict:
    circuit = discretize_network(net)
    rec = {
        "epoch": epoch,
        "step": step,
        "loss": mean_loss,
        "real_acc": real_accuracy(net, train_ds.x, train_ds.y),
        "discrete_acc": circuit_accuracy(circuit, train_ds.x, train_ds.y),
    }
    if val_ds is not None:
        rec["val_real_acc"] = real_accuracy(net, val_ds.x, val_ds.y)
        rec["val_discrete_acc"] = circuit_accuracy(circuit, val_ds.x, val_ds.y)
    if test_ds is not None:
        rec["test_real_acc"] = real_accuracy(net, test_ds.x, test_ds.y)
        rec["test_discrete_acc"] = circuit_accuracy(circuit, test_ds.x, test_ds.y)
    return rec


def write_history(history: Sequence[dict], path: str | Path) -> None:
    """Metrics as JSON lines, one record per epoch or iteration."""
    with open(path, "w") as fh:
        for rec in history:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


# -- gate recovery ------------------------------------------------------------


@dataclass
class Convergence:
    target: GateKind
    kind: str
    seed: int
    converged: bool
    iterations: int
    final_gate: GateKind

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target"] = self.target.name
        d["final_gate"] = self.final_gate.name
        return d


def converge_gate(target: GateKind | int, kind: str = "lnn", seed: int = 0,
                  max_iterations: int = 1000, lr: float = 0.01, sustain: int = 1,
                  lgn_init: str = "normal") -> Convergence:
    """Fit one neuron to a gate's truth table and time its discrete recovery.

    Full-batch BCE with Adam; the neuron is discretized after every step and
    the iteration count is the first step at which its gate has matched
    ``target`` for ``sustain`` consecutive steps. Runs that never get there
    report ``iterations = max_iterations``.
    """
    target = GateKind(target)
    data = synth_truth_table(target)
    x = data.x.astype(np.float64)
    t = data.y.astype(np.float64)
    net = single_neuron_network(kind, seed, lgn_init)
    state = AdamState(lr=lr)
    w = net.params[0]
    streak, gate = 0, _single_gate(kind, w)
    for it in range(1, max_iterations + 1):
        _, grads = backward(net, x, t, "bce")
        adam_step(state, net.params, grads)
        gate = _single_gate(kind, w)
        streak = streak + 1 if gate == target else 0
        if streak >= sustain:
            return Convergence(target, kind, seed, True, it - sustain + 1, gate)
    return Convergence(target, kind, seed, False, max_iterations, gate)


def _single_gate(kind: str, w: np.ndarray) -> GateKind:
    from .network import discretize_params

    return GateKind(int(discretize_params(kind, w)[0]))


# -- MLP baseline -------------------------------------------------------------


@dataclass
class MlpBaseline:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def widths(self) -> list[int]:
        return [w.shape[1] for w in self.weights]

    @property
    def param_count(self) -> int:
        return int(sum(w.size + b.size for w, b in zip(self.weights, self.biases)))

    def param_bytes(self, bytes_per_param: int = 4) -> int:
        return self.param_count * bytes_per_param


def build_mlp(input_width: int, hidden: Sequence[int], class_count: int, seed: int = 0) -> MlpBaseline:
    rng = np.random.default_rng([seed, 2])
    sizes = [input_width, *hidden, class_count]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpBaseline(weights, biases)


def mlp_forward(model: MlpBaseline, x) -> list[np.ndarray]:
    acts = [np.asarray(x, dtype=np.float64)]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w + b
        acts.append(z if i == last else np.maximum(z, 0.0))
    return acts


def mlp_backward(model: MlpBaseline, x, y):
    acts = mlp_forward(model, x)
    value, d = ce_loss(acts[-1], np.asarray(y, dtype=np.int64))
    gw, gb = [None] * len(model.weights), [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ d
        gb[i] = d.sum(axis=0)
        if i:
            d = (d @ model.weights[i].T) * (acts[i] > 0)
    return value, gw, gb


def mlp_accuracy(model: MlpBaseline, x, y) -> float:
    return float(np.mean(np.argmax(mlp_forward(model, x)[-1], axis=1) == np.asarray(y)))


def train_mlp(dataset: BinarizedDataset, spec: TrainSpec, hidden: Sequence[int] = (8, 8),
              seed: int = 0, test: BinarizedDataset | None = None,
              val: BinarizedDataset | None = None):
    """ReLU MLP with the same optimizer, batching, shuffling and epoch
    selection as the gate nets.

    Returns ``(model, history, accuracy)`` where accuracy is on ``test`` when
    given, otherwise on the training rows.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    model = build_mlp(dataset.n_features, hidden, dataset.class_count, seed)
    x, y = dataset.x.astype(np.float64), dataset.y
    params = model.weights + model.biases
    state = AdamState(lr=spec.lr)
    history = []
    best = (-1.0, 0, None)
    step = 0
    for epoch in range(1, spec.epochs + 1):
        order = epoch_order(len(dataset), spec.shuffle_seed, epoch)
        total = 0.0
        for start in range(0, order.size, spec.batch_size):
            idx = order[start:start + spec.batch_size]
            value, gw, gb = mlp_backward(model, x[idx], y[idx])
            adam_step(state, params, gw + gb)
            total += value * idx.size
            step += 1
        if epoch % spec.eval_every == 0 or epoch == spec.epochs:
            rec = {"epoch": epoch, "step": step, "loss": total / len(dataset),
                   "real_acc": mlp_accuracy(model, x, y)}
            if val is not None:
                rec["val_real_acc"] = mlp_accuracy(model, val.x, val.y)
                if rec["val_real_acc"] > best[0]:
                    best = (rec["val_real_acc"], epoch, [p.copy() for p in params])
            if test is not None:
                rec["test_real_acc"] = mlp_accuracy(model, test.x, test.y)
            history.append(rec)
    if spec.select_best and best[2] is not None:
        for p, saved in zip(params, best[2]):
            p[...] = saved
        history.append(_selected_record(history, best[1]))
    target = test if test is not None else dataset
    return model, history, mlp_accuracy(model, target.x, target.y)


__all__ = [
    "AdamState",
    "Convergence",
    "MlpBaseline",
    "TrainResult",
    "TrainSpec",
    "adam_step",
    "backward",
    "bce_loss",
    "ce_loss",
    "converge_gate",
    "grad_check",
    "group_sum",
    "loss",
    "softmax",
    "train",
    "train_mlp",
    "write_history",
]
