"""Layered gate networks with fixed random wiring.

Two neuron kinds share the same wiring machinery:

* ``lnn``: four weights per neuron, ``c = sigmoid(w1*a + w2*b + w3*a*b + w4)``.
* ``lgn``: sixteen logits per neuron, ``c = sum_k softmax(z)_k * relax_k(a, b)``.

Activations are kept as ``(batch, width)`` float64 arrays.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .gates import CORNERS, TRUTH_TABLES, GateKind, gate_from_truth_table

NEURON_KINDS = ("lnn", "lgn")
PAIRINGS = ("random", "partition")
LGN_INITS = ("normal", "uniform")
CHECKPOINT_FORMAT = "logicnn-network"
CHECKPOINT_VERSION = 1

_CORNER_A = np.array([c[0] for c in CORNERS], dtype=np.float64)
_CORNER_B = np.array([c[1] for c in CORNERS], dtype=np.float64)


def sigmoid(z):
    return expit(np.asarray(z, dtype=np.float64))


def softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


@dataclass(frozen=True)
class NetworkConfig:
    input_width: int
    layers: int
    neurons_per_layer: int
    neuron_kind: str = "lnn"
    seed: int = 0
    class_count: int = 1
    pairing: str = "random"
    #: ``normal``: logits ~ N(0, 1); ``uniform``: logits ~ U(-0.1, 0.1)
    lgn_init: str = "normal"

    def __post_init__(self):
        if self.input_width < 1:
            raise ValueError("input_width must be >= 1")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.neurons_per_layer < 1:
            raise ValueError("neurons_per_layer must be >= 1 (zero-width layers are not allowed)")
        if not 1 <= self.class_count <= self.neurons_per_layer:
            raise ValueError("need 1 <= class_count <= neurons_per_layer")
        if self.neuron_kind not in NEURON_KINDS:
            raise ValueError(f"neuron_kind must be one of {NEURON_KINDS}, got {self.neuron_kind!r}")
        if self.pairing not in PAIRINGS:
            raise ValueError(f"pairing must be one of {PAIRINGS}, got {self.pairing!r}")
        if self.lgn_init not in LGN_INITS:
            raise ValueError(f"lgn_init must be one of {LGN_INITS}, got {self.lgn_init!r}")

    @property
    def total_neurons(self) -> int:
        return self.layers * self.neurons_per_layer

    def layer_input_width(self, layer: int) -> int:
        return self.input_width if layer == 0 else self.neurons_per_layer


@dataclass
class Wiring:
    """``left[l][j]``/``right[l][j]`` index neuron j's inputs in layer l - 1."""

    left: list[np.ndarray]
    right: list[np.ndarray]
    seed: int

    def pairs(self, layer: int) -> list[tuple[int, int]]:
        return list(zip(self.left[layer].tolist(), self.right[layer].tolist()))

    def __eq__(self, other):
        if not isinstance(other, Wiring):
            return NotImplemented
        return (
            self.seed == other.seed
            and len(self.left) == len(other.left)
            and all(np.array_equal(x, y) for x, y in zip(self.left, other.left))
            and all(np.array_equal(x, y) for x, y in zip(self.right, other.right))
        )


@dataclass(frozen=True)
class LnnNeuron:
    w1: float
    w2: float
    w3: float
    w4: float

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3, self.w4], dtype=np.float64)


@dataclass(frozen=True)
class LgnNeuron:
    logits: tuple[float, ...]

    def __post_init__(self):
        if len(self.logits) != 16:
            raise ValueError("an LGN neuron has exactly 16 logits")

    @property
    def probabilities(self) -> np.ndarray:
        return softmax(np.asarray(self.logits, dtype=np.float64))


@dataclass
class RealNetwork:
    config: NetworkConfig
    wiring: Wiring
    #: per layer: ``(n, 4)`` LNN weights or ``(n, 16)`` LGN logits
    params: list[np.ndarray] = field(default_factory=list)

    @property
    def kind(self) -> str:
        return self.config.neuron_kind

    @property
    def total_neurons(self) -> int:
        return sum(p.shape[0] for p in self.params)

    def neuron(self, layer: int, index: int) -> LnnNeuron | LgnNeuron:
        row = self.params[layer][index]
        if self.kind == "lnn":
            return LnnNeuron(*map(float, row))
        return LgnNeuron(tuple(map(float, row)))

    def copy(self) -> "RealNetwork":
        return RealNetwork(self.config, self.wiring, [p.copy() for p in self.params])


def _draw_wiring(rng: np.random.Generator, n_in: int, n_out: int, pairing: str):
    if pairing == "random":
        idx = rng.integers(0, n_in, size=(n_out, 2))
    else:
        # every previous-layer neuron used once before any is reused
        reps = -(-2 * n_out // n_in)
        idx = np.concatenate([rng.permutation(n_in) for _ in range(reps)])[: 2 * n_out]
        idx = idx.reshape(n_out, 2)
    return idx[:, 0].astype(np.int64), idx[:, 1].astype(np.int64)


def make_wiring(config: NetworkConfig) -> Wiring:
    rng = np.random.default_rng([config.seed, 0])
    left, right = [], []
    for layer in range(config.layers):
        lo, hi = _draw_wiring(
            rng, config.layer_input_width(layer), config.neurons_per_layer, config.pairing
        )
        left.append(lo)
        right.append(hi)
    return Wiring(left, right, config.seed)


def build_network(config: NetworkConfig) -> RealNetwork:
    """Random wiring plus seeded initial weights.

    LNN weights start U(-1, 1). LGN logits start N(0, 1) by default, with
    ``lgn_init="uniform"`` giving U(-0.1, 0.1). Wiring and weights come from
    independent streams, so the initialization never changes the wiring.
    """
    wiring = make_wiring(config)
    rng = np.random.default_rng([config.seed, 1])
    n = config.neurons_per_layer
    params = []
    for _ in range(config.layers):
        if config.neuron_kind == "lnn":
            params.append(rng.uniform(-1.0, 1.0, size=(n, 4)))
        elif config.lgn_init == "normal":
            params.append(rng.standard_normal(size=(n, 16)))
        else:
            params.append(rng.uniform(-0.1, 0.1, size=(n, 16)))
    return RealNetwork(config, wiring, params)


def single_neuron_network(kind: str, seed: int = 0, lgn_init: str = "normal") -> RealNetwork:
    """One neuron reading inputs 0 and 1, the gate-recovery setup."""
    config = NetworkConfig(input_width=2, layers=1, neurons_per_layer=1, neuron_kind=kind,
                           seed=seed, lgn_init=lgn_init)
    net = build_network(config)
    net.wiring.left[0][:] = 0
    net.wiring.right[0][:] = 1
    return net


# -- forward passes -----------------------------------------------------------


def forward_lnn(n: LnnNeuron, a: float, b: float) -> float:
    z = n.w1 * a + n.w2 * b + n.w3 * a * b + n.w4
    return float(sigmoid(np.array([z]))[0])


def forward_lgn(n: LgnNeuron, a: float, b: float) -> float:
    p = n.probabilities
    q = p @ TRUTH_TABLES
    return float(_lgn_eval(q[None, :], np.array([[a]]), np.array([[b]]))[0, 0])


def _lgn_eval(q, a, b):
    """Soft truth tables ``q`` (n, 4) at inputs (batch, n)."""
    na, nb = 1.0 - a, 1.0 - b
    c = na * nb * q[:, 0] + na * b * q[:, 1] + a * nb * q[:, 2] + a * b * q[:, 3]
    return np.clip(c, 0.0, 1.0)


def lnn_layer(w: np.ndarray, a: np.ndarray, b: np.ndarray, keep_pre: bool = False):
    ab = a * b
    z = w[:, 0] * a + w[:, 1] * b + w[:, 2] * ab + w[:, 3]
    c = sigmoid(z)
    return (c, z) if keep_pre else c


def lgn_soft_tables(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = softmax(logits, axis=1)
    return p, p @ TRUTH_TABLES.astype(np.float64)


def forward_layers(net: RealNetwork, x) -> list[np.ndarray]:
    """All activations, starting with the (batch, input_width) input itself."""
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if h.shape[1] != net.config.input_width:
        raise ValueError(f"expected {net.config.input_width} features, got {h.shape[1]}")
    acts = [h]
    for layer, w in enumerate(net.params):
        a = h[:, net.wiring.left[layer]]
        b = h[:, net.wiring.right[layer]]
        if net.kind == "lnn":
            h = lnn_layer(w, a, b)
        else:
            h = _lgn_eval(lgn_soft_tables(w)[1], a, b)
        acts.append(h)
    return acts


def forward_network(net: RealNetwork, x) -> np.ndarray:
    """Final-layer activations; a 1-D input gives a 1-D output."""
    x = np.asarray(x, dtype=np.float64)
    out = forward_layers(net, x)[-1]
    return out[0] if x.ndim == 1 else out


# -- discretization -----------------------------------------------------------


def discretize_neuron_lnn(n: LnnNeuron) -> GateKind:
    outs = [forward_lnn(n, a, b) for a, b in CORNERS]
    return gate_from_truth_table([int(o > 0.5) for o in outs])


def discretize_neuron_lgn(n: LgnNeuron) -> GateKind:
    # argmax returns the first maximum, i.e. the lowest gate code
    return GateKind(int(np.argmax(np.asarray(n.logits))))


def discretize_params(kind: str, w: np.ndarray) -> np.ndarray:
    """Vectorized per-layer discretization to uint8 gate codes."""
    if kind == "lgn":
        return np.argmax(w, axis=1).astype(np.uint8)
    c = lnn_layer(w, np.broadcast_to(_CORNER_A, (w.shape[0], 4)).T,
                  np.broadcast_to(_CORNER_B, (w.shape[0], 4)).T)
    bits = (c > 0.5).astype(np.uint8)  # (4 corners, n)
    return (bits[0] << 3 | bits[1] << 2 | bits[2] << 1 | bits[3]).astype(np.uint8)


def discretize_network(net: RealNetwork):
    from .discrete import DiscreteCircuit

    gates = [discretize_params(net.kind, w) for w in net.params]
    return DiscreteCircuit(
        input_width=net.config.input_width,
        gates=gates,
        left=[x.copy() for x in net.wiring.left],
        right=[x.copy() for x in net.wiring.right],
        class_count=net.config.class_count,
    )


# -- checkpoints --------------------------------------------------------------


def network_to_dict(net: RealNetwork) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(net.config),
        "wiring": {
            "seed": net.wiring.seed,
            "left": [x.tolist() for x in net.wiring.left],
            "right": [x.tolist() for x in net.wiring.right],
        },
        # repr of a float round-trips exactly, so JSON keeps weights bit-exact
        "params": [p.tolist() for p in net.params],
    }


def network_from_dict(data: dict) -> RealNetwork:
    if data.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a network checkpoint (format={data.get('format')!r})")
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data.get('version')!r}")
    config = NetworkConfig(**data["config"])
    w = data["wiring"]
    wiring = Wiring(
        [np.asarray(x, dtype=np.int64) for x in w["left"]],
        [np.asarray(x, dtype=np.int64) for x in w["right"]],
        int(w["seed"]),
    )
    params = [np.asarray(p, dtype=np.float64) for p in data["params"]]
    net = RealNetwork(config, wiring, params)
    _check_shapes(net)
    return net


def _check_shapes(net: RealNetwork) -> None:
    cfg = net.config
    width = 4 if cfg.neuron_kind == "lnn" else 16
    if len(net.params) != cfg.layers or len(net.wiring.left) != cfg.layers:
        raise ValueError("layer count does not match config")
    for layer, p in enumerate(net.params):
        n_in = cfg.layer_input_width(layer)
        if p.shape != (cfg.neurons_per_layer, width):
            raise ValueError(f"layer {layer}: params have shape {p.shape}")
        for idx in (net.wiring.left[layer], net.wiring.right[layer]):
            if idx.shape != (cfg.neurons_per_layer,) or idx.min() < 0 or idx.max() >= n_in:
                raise ValueError(f"layer {layer}: wiring out of range")


def save_network(net: RealNetwork, path: str | Path,
                 input_names: Sequence[str] | None = None) -> None:
    data = network_to_dict(net)
    if input_names is not None:
        if len(input_names) != net.config.input_width:
            raise ValueError("need one name per input")
        data["input_names"] = list(input_names)
    Path(path).write_text(json.dumps(data) + "\n")


def load_network(path: str | Path) -> RealNetwork:
    return network_from_dict(json.loads(Path(path).read_text()))


def network_param_count(net: RealNetwork) -> int:
    return int(sum(p.size for p in net.params))
