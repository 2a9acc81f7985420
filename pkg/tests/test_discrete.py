import itertools
import json

import numpy as np
import pytest

from logicnn.discrete import (
    DiscreteCircuit,
    PackedBatch,
    accuracy,
    circuit_from_dict,
    circuit_input_names,
    circuit_to_dict,
    class_scores,
    eval_circuit,
    eval_packed,
    export_dot,
    load_circuit,
    model_size_bytes,
    pack_bits,
    predict,
    random_circuit,
    save_circuit,
    unpack_bits,
)
from logicnn.gates import GateKind, relax
from logicnn.network import NetworkConfig, build_network, discretize_network, forward_network


def _one(gate, input_width=2, lo=0, hi=1, class_count=1):
    return DiscreteCircuit(input_width, [[gate]], [[lo]], [[hi]], class_count)


def _naive(c, x):
    """Per-sample evaluation straight from relax() at binary points."""
    out = []
    for row in x:
        h = [int(v) for v in row]
        for g, lo, hi in zip(c.gates, c.left, c.right):
            h = [int(relax(int(k), h[i], h[j])) for k, i, j in zip(g, lo, hi)]
        out.append(h)
    return np.array(out, dtype=np.uint8)


def test_single_and():
    c = _one(GateKind.AND)
    assert eval_circuit(c, [1, 1]).tolist() == [1]
    assert eval_circuit(c, [[0, 0], [0, 1], [1, 0], [1, 1]]).ravel().tolist() == [0, 0, 0, 1]


def test_pass_through_layer_selects_inputs():
    c = DiscreteCircuit(4, [[GateKind.A] * 3], [[3, 0, 2]], [[1, 1, 1]])
    assert eval_circuit(c, [1, 0, 0, 1]).tolist() == [1, 1, 0]


def test_eval_rejects_bad_input():
    c = _one(GateKind.OR)
    with pytest.raises(ValueError):
        eval_circuit(c, [1, 0, 1])
    with pytest.raises(ValueError):
        eval_circuit(c, [2, 0])


def test_circuit_validation():
    with pytest.raises(ValueError):
        DiscreteCircuit(2, [[16]], [[0]], [[1]])
    with pytest.raises(ValueError):
        DiscreteCircuit(2, [[1]], [[0]], [[2]])
    with pytest.raises(ValueError):
        DiscreteCircuit(2, [], [], [])
    with pytest.raises(ValueError):
        DiscreteCircuit(2, [[1, 1]], [[0, 1]], [[0, 1]], class_count=3)


def test_matches_naive_relax_evaluation():
    rng = np.random.default_rng(0)
    for _ in range(20):
        c = random_circuit(rng, 6, [5, 4, 3])
        x = np.array(list(itertools.product((0, 1), repeat=6)), dtype=np.uint8)
        assert np.array_equal(eval_circuit(c, x), _naive(c, x))


@pytest.mark.parametrize("kind", ["lnn", "lgn"])
def test_circuit_agrees_with_saturated_real_network(kind):
    rng = np.random.default_rng(1)
    for width in (3, 6, 10):
        net = build_network(NetworkConfig(input_width=width, layers=3, neurons_per_layer=8,
                                          neuron_kind=kind, seed=width))
        # saturate each neuron onto a random target gate
        for p in net.params:
            codes = rng.integers(0, 16, size=p.shape[0])
            if kind == "lgn":
                p[:] = 0.0
                p[np.arange(p.shape[0]), codes] = 60.0
            else:
                from logicnn.gates import TRUTH_TABLES
                t = TRUTH_TABLES[codes].astype(float) * 2 - 1  # +-1 per corner
                # solve w for z = 40 * t at the corners: z00=w4, z01=w2+w4, z10=w1+w4, z11=all
                w4 = t[:, 0]
                w2 = t[:, 1] - w4
                w1 = t[:, 2] - w4
                w3 = t[:, 3] - w1 - w2 - w4
                p[:] = 40 * np.stack([w1, w2, w3, w4], axis=1)
        c = discretize_network(net)
        x = np.array(list(itertools.product((0, 1), repeat=width)), dtype=np.uint8)
        real = forward_network(net, x.astype(float))
        assert np.array_equal((real > 0.5).astype(np.uint8), eval_circuit(c, x))


def test_pack_unpack_round_trip_and_padding():
    rng = np.random.default_rng(2)
    for n in (0, 1, 63, 64, 65, 200):
        x = rng.integers(0, 2, size=(n, 7), dtype=np.uint8)
        b = pack_bits(x)
        assert b.lanes.dtype == np.uint64 and b.lanes.shape == (7, -(-n // 64))
        assert np.array_equal(unpack_bits(b), x)
        if n % 64:
            assert np.all(b.lanes[:, -1] >> np.uint64(n % 64) == 0)


def test_lane_bit_layout():
    x = np.zeros((70, 2), dtype=np.uint8)
    x[5, 0] = 1
    x[66, 1] = 1
    lanes = pack_bits(x).lanes
    assert int(lanes[0, 0]) == 1 << 5
    assert int(lanes[1, 1]) == 1 << 2


def test_packed_matches_naive_on_random_circuits():
    rng = np.random.default_rng(3)
    for _ in range(10):
        c = random_circuit(rng, 12, [16, 16, 8])
        x = rng.integers(0, 2, size=(10_000, 12), dtype=np.uint8)
        out = eval_packed(c, pack_bits(x))
        assert np.array_equal(unpack_bits(out), eval_circuit(c, x))
        assert np.all(out.lanes[:, -1] >> np.uint64(10_000 % 64) == 0)


def test_packed_every_gate_constant_folding_keeps_padding_zero():
    c = DiscreteCircuit(2, [list(range(16))], [[0] * 16], [[1] * 16])
    x = np.array(list(itertools.product((0, 1), repeat=2)), dtype=np.uint8)
    out = eval_packed(c, pack_bits(x))
    assert np.array_equal(unpack_bits(out), eval_circuit(c, x))
    assert np.all(out.lanes >> np.uint64(4) == 0)


def test_packed_empty_and_single():
    rng = np.random.default_rng(4)
    c = random_circuit(rng, 5, [4, 4])
    empty = eval_packed(c, pack_bits(np.zeros((0, 5), dtype=np.uint8)))
    assert empty.n_samples == 0 and unpack_bits(empty).shape == (0, 4)
    x = rng.integers(0, 2, size=(1, 5), dtype=np.uint8)
    assert np.array_equal(unpack_bits(eval_packed(c, pack_bits(x)))[0], eval_circuit(c, x[0]))
    with pytest.raises(ValueError):
        eval_packed(c, pack_bits(np.zeros((3, 4), dtype=np.uint8)))


def test_evaluation_is_pure():
    rng = np.random.default_rng(5)
    c = random_circuit(rng, 8, [8, 8])
    x = rng.integers(0, 2, size=(300, 8), dtype=np.uint8)
    first = eval_circuit(c, x)
    assert np.array_equal(first, eval_circuit(c, x))
    b = pack_bits(x)
    assert np.array_equal(eval_packed(c, b).lanes, eval_packed(c, b).lanes)


def test_class_scores_examples():
    c = DiscreteCircuit(4, [[GateKind.A] * 4], [[0, 1, 2, 3]], [[0, 1, 2, 3]], class_count=2)
    assert class_scores(c, np.array([1, 1, 0, 0])).tolist() == [2, 0]
    assert predict(c, [[1, 1, 0, 0]]).tolist() == [0]
    assert predict(c, [[0, 0, 0, 0]]).tolist() == [0]
    assert predict(c, [[0, 1, 1, 1]]).tolist() == [1]
    assert accuracy(c, [[1, 1, 0, 0], [0, 1, 1, 1]], [0, 1]) == 1.0
    with pytest.raises(ValueError):
        class_scores(DiscreteCircuit(3, [[3] * 3], [[0, 1, 2]], [[0, 1, 2]], 2), np.ones(3))


def test_model_size_bytes():
    def net_circuit(layers, width):
        g = [np.zeros(width, dtype=np.uint8)] * layers
        idx = [np.zeros(width, dtype=np.int64)] * layers
        return DiscreteCircuit(4, g, idx, idx, 2)

    assert model_size_bytes(net_circuit(5, 128)) == 320
    assert model_size_bytes(net_circuit(5, 256)) == 640
    assert model_size_bytes(_one(GateKind.AND)) == 1
    assert model_size_bytes(net_circuit(1, 3)) == 2


def test_dot_export():
    c = _one(GateKind.AND)
    text = export_dot(c)
    assert text.count("shape=box") == 2
    assert text.count("->") == 2
    assert 'label="AND"' in text
    assert text == export_dot(c)
    rng = np.random.default_rng(6)
    big = random_circuit(rng, 7, [5, 3])
    dot = export_dot(big, [f'in"{i}' for i in range(7)])
    nodes = [ln for ln in dot.splitlines() if "[label=" in ln and "->" not in ln]
    assert len(nodes) == 7 + 8
    assert dot.count("->") == 2 * 8
    assert 'in\\"0' in dot


def test_circuit_file_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    c = random_circuit(rng, 6, [4, 4], class_count=2)
    path = tmp_path / "c.json"
    save_circuit(c, path, input_names=[f"f{i}" for i in range(6)])
    assert load_circuit(path) == c
    assert circuit_input_names(path) == [f"f{i}" for i in range(6)]
    data = json.loads(path.read_text())
    assert data["format"] == "logicnn-circuit" and data["version"] == 1
    assert all(isinstance(n, str) for n in data["layers"][0]["gates"])
    assert circuit_from_dict(circuit_to_dict(c)) == c
    with pytest.raises(ValueError):
        circuit_from_dict({**data, "version": 99})
