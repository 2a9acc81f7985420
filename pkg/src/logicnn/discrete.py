"""Frozen boolean circuits: exact evaluation, packed inference, exports."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .gates import TRUTH_TABLES, GateKind, gate_from_name

CIRCUIT_FORMAT = "logicnn-circuit"
CIRCUIT_VERSION = 1
WORD_BITS = 64
_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


@dataclass
class DiscreteCircuit:
    input_width: int
    gates: list[np.ndarray]
    left: list[np.ndarray]
    right: list[np.ndarray]
    class_count: int = 1

    def __post_init__(self):
        self.gates = [np.asarray(g, dtype=np.uint8) for g in self.gates]
        self.left = [np.asarray(x, dtype=np.int64) for x in self.left]
        self.right = [np.asarray(x, dtype=np.int64) for x in self.right]
        if not (len(self.gates) == len(self.left) == len(self.right)) or not self.gates:
            raise ValueError("a circuit needs at least one layer with matching gates and wiring")
        n_in = self.input_width
        for layer, (g, lo, hi) in enumerate(zip(self.gates, self.left, self.right)):
            if not (g.shape == lo.shape == hi.shape) or g.ndim != 1 or g.size == 0:
                raise ValueError(f"layer {layer}: gates and wiring shapes disagree")
            if g.max() > 15:
                raise ValueError(f"layer {layer}: gate code out of range")
            if min(lo.min(), hi.min()) < 0 or max(lo.max(), hi.max()) >= n_in:
                raise ValueError(f"layer {layer}: wiring index out of range")
            n_in = g.size
        if not 1 <= self.class_count <= self.output_width:
            raise ValueError("class_count must be between 1 and the output width")

    @property
    def layers(self) -> int:
        return len(self.gates)

    @property
    def output_width(self) -> int:
        return int(self.gates[-1].size)

    @property
    def total_neurons(self) -> int:
        return int(sum(g.size for g in self.gates))

    def neurons(self):
        """Yield ``(layer, index, GateKind, left, right)`` in layer order."""
        for layer, (g, lo, hi) in enumerate(zip(self.gates, self.left, self.right)):
            for j in range(g.size):
                yield layer, j, GateKind(int(g[j])), int(lo[j]), int(hi[j])

    def __eq__(self, other):
        if not isinstance(other, DiscreteCircuit):
            return NotImplemented
        return (
            self.input_width == other.input_width
            and self.class_count == other.class_count
            and self.layers == other.layers
            and all(
                np.array_equal(x, y)
                for xs, ys in ((self.gates, other.gates), (self.left, other.left), (self.right, other.right))
                for x, y in zip(xs, ys)
            )
        )


def random_circuit(rng: np.random.Generator, input_width: int, widths: Sequence[int],
                   class_count: int = 1) -> DiscreteCircuit:
    gates, left, right = [], [], []
    n_in = input_width
    for w in widths:
        gates.append(rng.integers(0, 16, size=w, dtype=np.uint8))
        left.append(rng.integers(0, n_in, size=w))
        right.append(rng.integers(0, n_in, size=w))
        n_in = w
    return DiscreteCircuit(input_width, gates, left, right, class_count)


# -- exact evaluation ---------------------------------------------------------


def eval_circuit(c: DiscreteCircuit, x) -> np.ndarray:
    """Evaluate on a bit vector (or a (batch, width) bit matrix) by table lookup."""
    h = np.asarray(x)
    single = h.ndim == 1
    h = np.atleast_2d(h).astype(np.uint8)
    if h.shape[1] != c.input_width:
        raise ValueError(f"expected {c.input_width} input bits, got {h.shape[1]}")
    if h.size and h.max() > 1:
        raise ValueError("inputs must be bits")
    for g, lo, hi in zip(c.gates, c.left, c.right):
        corner = (h[:, lo] << 1) | h[:, hi]
        h = TRUTH_TABLES[g[None, :], corner]
    return h[0] if single else h


# -- packed evaluation --------------------------------------------------------


@dataclass
class PackedBatch:
    """One row of 64-bit words per feature; bit j of word w is sample 64*w + j."""

    lanes: np.ndarray
    n_samples: int

    @property
    def width(self) -> int:
        return int(self.lanes.shape[0])


def _tail_mask(n_samples: int, n_words: int) -> np.ndarray:
    mask = np.full(n_words, _ONES, dtype=np.uint64)
    rem = n_samples % WORD_BITS
    if n_words and rem:
        mask[-1] = np.uint64((1 << rem) - 1)
    return mask


def pack_bits(x) -> PackedBatch:
    x = np.asarray(x, dtype=np.uint8)
    if x.ndim != 2:
        raise ValueError("pack_bits expects a (samples, features) matrix")
    n, f = x.shape
    n_words = -(-n // WORD_BITS)
    padded = np.zeros((f, n_words * WORD_BITS), dtype=np.uint8)
    padded[:, :n] = x.T
    raw = np.packbits(padded, axis=1, bitorder="little")
    lanes = raw.view("<u8").astype(np.uint64).reshape(f, n_words)
    return PackedBatch(lanes, n)


def unpack_bits(batch: PackedBatch) -> np.ndarray:
    f, n_words = batch.lanes.shape
    raw = batch.lanes.astype("<u8").view(np.uint8).reshape(f, n_words * 8)
    bits = np.unpackbits(raw, axis=1, bitorder="little")[:, : batch.n_samples]
    return np.ascontiguousarray(bits.T)


_WORD_OPS = {
    0: lambda a, b: np.zeros_like(a),
    1: lambda a, b: a & b,
    2: lambda a, b: a & ~b,
    3: lambda a, b: a,
    4: lambda a, b: ~a & b,
    5: lambda a, b: b,
    6: lambda a, b: a ^ b,
    7: lambda a, b: a | b,
    8: lambda a, b: ~(a | b),
    9: lambda a, b: ~(a ^ b),
    10: lambda a, b: ~b,
    11: lambda a, b: a | ~b,
    12: lambda a, b: ~a,
    13: lambda a, b: ~a | b,
    14: lambda a, b: ~(a & b),
    15: lambda a, b: np.full_like(a, _ONES),
}


def eval_packed(c: DiscreteCircuit, batch: PackedBatch) -> PackedBatch:
    if batch.width != c.input_width:
        raise ValueError(f"batch has {batch.width} lanes, circuit expects {c.input_width}")
    h = batch.lanes
    tail = _tail_mask(batch.n_samples, h.shape[1])
    for g, lo, hi in zip(c.gates, c.left, c.right):
        a, b = h[lo], h[hi]
        out = np.empty((g.size, h.shape[1]), dtype=np.uint64)
        for code in np.unique(g):
            sel = g == code
            out[sel] = _WORD_OPS[int(code)](a[sel], b[sel])
        h = out & tail
    return PackedBatch(h, batch.n_samples)


# -- readout ------------------------------------------------------------------


def class_scores(c: DiscreteCircuit, output_bits) -> np.ndarray:
    """Count of set bits in each of ``class_count`` contiguous output groups."""
    bits = np.asarray(output_bits)
    width = bits.shape[-1]
    if width % c.class_count:
        raise ValueError(f"output width {width} is not divisible by {c.class_count} classes")
    grouped = bits.reshape(*bits.shape[:-1], c.class_count, width // c.class_count)
    return grouped.astype(np.int64).sum(axis=-1)


def predict(c: DiscreteCircuit, x) -> np.ndarray:
    """Class predictions for a (samples, input_width) bit matrix; ties go low."""
    x = np.asarray(x, dtype=np.uint8)
    out = unpack_bits(eval_packed(c, pack_bits(x)))
    return np.argmax(class_scores(c, out), axis=-1)


def accuracy(c: DiscreteCircuit, x, y) -> float:
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("cannot score an empty dataset")
    return float(np.mean(predict(c, x) == y))


# -- size and exports ---------------------------------------------------------


def model_size_bytes(c: DiscreteCircuit) -> int:
    """Four bits per neuron choose one of 16 gates; wiring is not counted."""
    return (c.total_neurons * 4 + 7) // 8


def neuron_id(layer: int, index: int) -> str:
    return f"n{layer}_{index}"


def export_dot(c: DiscreteCircuit, input_names: Sequence[str] | None = None) -> str:
    names = list(input_names) if input_names is not None else [f"x{i}" for i in range(c.input_width)]
    if len(names) != c.input_width:
        raise ValueError("need one name per input")
    lines = ["digraph circuit {", "  rankdir=LR;"]
    for i, name in enumerate(names):
        lines.append(f'  x{i} [label="{_dot_escape(name)}", shape=box];')
    for layer, j, gate, _, _ in c.neurons():
        lines.append(f'  {neuron_id(layer, j)} [label="{gate.name}"];')
    for layer, j, _, lo, hi in c.neurons():
        src = (lambda k: f"x{k}") if layer == 0 else (lambda k, l=layer: neuron_id(l - 1, k))
        lines.append(f'  {src(lo)} -> {neuron_id(layer, j)} [label="a"];')
        lines.append(f'  {src(hi)} -> {neuron_id(layer, j)} [label="b"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def circuit_to_dict(c: DiscreteCircuit) -> dict:
    return {
        "format": CIRCUIT_FORMAT,
        "version": CIRCUIT_VERSION,
        "input_width": c.input_width,
        "class_count": c.class_count,
        "layers": [
            {
                "gates": [GateKind(int(k)).name for k in g],
                "left": lo.tolist(),
                "right": hi.tolist(),
            }
            for g, lo, hi in zip(c.gates, c.left, c.right)
        ],
    }


def circuit_from_dict(data: dict) -> DiscreteCircuit:
    if data.get("format") != CIRCUIT_FORMAT:
        raise ValueError(f"not a circuit file (format={data.get('format')!r})")
    if data.get("version") != CIRCUIT_VERSION:
        raise ValueError(f"unsupported circuit version {data.get('version')!r}")
    layers = data["layers"]
    return DiscreteCircuit(
        input_width=int(data["input_width"]),
        gates=[[gate_from_name(n) for n in layer["gates"]] for layer in layers],
        left=[layer["left"] for layer in layers],
        right=[layer["right"] for layer in layers],
        class_count=int(data["class_count"]),
    )


def save_circuit(c: DiscreteCircuit, path: str | Path,
                 input_names: Sequence[str] | None = None) -> None:
    data = circuit_to_dict(c)
    if input_names is not None:
        if len(input_names) != c.input_width:
            raise ValueError("need one name per input")
        data["input_names"] = list(input_names)
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def load_circuit(path: str | Path) -> DiscreteCircuit:
    return circuit_from_dict(json.loads(Path(path).read_text()))


def circuit_input_names(path: str | Path) -> list[str] | None:
    """Feature names stored alongside a saved circuit, if any."""
    return json.loads(Path(path).read_text()).get("input_names")
