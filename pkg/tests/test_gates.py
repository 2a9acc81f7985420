import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from logicnn.gates import (
    CORNERS,
    TRUTH_TABLES,
    GateKind,
    corner_basis,
    gate_from_name,
    gate_from_truth_table,
    relax,
    relax_array,
    truth_table,
)

# the gate table transcribed by hand, row by row: (name, formula, outputs at (0,0),(0,1),(1,0),(1,1))
GATE_TABLE = [
    ("FALSE", lambda A, B: 0.0, (0, 0, 0, 0)),
    ("AND", lambda A, B: A * B, (0, 0, 0, 1)),
    ("A_NIMPLIES_B", lambda A, B: A - A * B, (0, 0, 1, 0)),
    ("A", lambda A, B: A, (0, 0, 1, 1)),
    ("B_NIMPLIES_A", lambda A, B: B - A * B, (0, 1, 0, 0)),
    ("B", lambda A, B: B, (0, 1, 0, 1)),
    ("XOR", lambda A, B: A + B - 2 * A * B, (0, 1, 1, 0)),
    ("OR", lambda A, B: A + B - A * B, (0, 1, 1, 1)),
    ("NOR", lambda A, B: 1 - (A + B - A * B), (1, 0, 0, 0)),
    ("XNOR", lambda A, B: 1 - (A + B - 2 * A * B), (1, 0, 0, 1)),
    ("NOT_B", lambda A, B: 1 - B, (1, 0, 1, 0)),
    ("B_IMPLIES_A", lambda A, B: 1 - B + A * B, (1, 0, 1, 1)),
    ("NOT_A", lambda A, B: 1 - A, (1, 1, 0, 0)),
    ("A_IMPLIES_B", lambda A, B: 1 - A + A * B, (1, 1, 0, 1)),
    ("NAND", lambda A, B: 1 - A * B, (1, 1, 1, 0)),
    ("TRUE", lambda A, B: 1.0, (1, 1, 1, 1)),
]


def test_sixteen_codes_in_table_order():
    assert len(GateKind) == 16
    for code, (name, _, bits) in enumerate(GATE_TABLE):
        g = GateKind(code)
        assert g.name == name
        assert truth_table(g) == bits
        # the code is the truth table read as a 4-bit number, first corner high
        assert int("".join(map(str, bits)), 2) == code


def test_truth_table_examples():
    assert truth_table(GateKind.AND) == (0, 0, 0, 1)
    assert truth_table(GateKind.FALSE) == (0, 0, 0, 0)
    assert truth_table(GateKind.A_IMPLIES_B) == (1, 1, 0, 1)


def test_gate_from_truth_table_examples():
    assert gate_from_truth_table((0, 1, 1, 1)) is GateKind.OR
    assert gate_from_truth_table((1, 1, 1, 1)) is GateKind.TRUE
    assert gate_from_truth_table((0, 1, 1, 0)) is GateKind.XOR


def test_code_bijection():
    for g in GateKind:
        assert gate_from_truth_table(truth_table(g)) is g
    for bits in itertools.product((0, 1), repeat=4):
        assert truth_table(gate_from_truth_table(bits)) == bits


@pytest.mark.parametrize("bad", [(0, 1, 1), (0, 1, 2, 0), (0, 0, 0, 0, 1)])
def test_gate_from_truth_table_rejects(bad):
    with pytest.raises(ValueError):
        gate_from_truth_table(bad)


def test_corner_agreement_exact():
    for code, (_, _, bits) in enumerate(GATE_TABLE):
        for (a, b), bit in zip(CORNERS, bits):
            assert relax(code, a, b) == bit


def test_relax_examples():
    assert relax(GateKind.AND, 1, 1) == 1
    assert relax(GateKind.AND, 0.5, 0.5) == 0.25
    assert relax(GateKind.XOR, 0.5, 0.5) == 0.5


@pytest.mark.parametrize("a,b", [(-0.1, 0.5), (0.5, 1.01), (float("nan"), 0.0)])
def test_relax_rejects_out_of_range(a, b):
    with pytest.raises(ValueError):
        relax(GateKind.OR, a, b)


@given(st.floats(0, 1), st.floats(0, 1))
def test_relax_matches_table_formulas_and_range(a, b):
    for code, (_, formula, _) in enumerate(GATE_TABLE):
        out = relax(code, a, b)
        assert 0.0 <= out <= 1.0
        assert out == pytest.approx(formula(a, b), abs=1e-12)


@given(st.floats(0, 1), st.floats(0, 1))
def test_negation_pairing(a, b):
    for g in GateKind:
        assert g.negation.value == 15 - g.value
        assert relax(g.negation, a, b) == pytest.approx(1.0 - relax(g, a, b), abs=1e-15)


def test_corner_basis_reproduces_every_relaxation():
    rng = np.random.default_rng(3)
    a, b = rng.random(500), rng.random(500)
    phi = corner_basis(a, b)
    assert np.allclose(phi.sum(axis=-1), 1.0)
    for g in GateKind:
        assert np.allclose(phi @ TRUTH_TABLES[g], relax_array(g, a, b), atol=1e-12)


def test_gate_names_round_trip():
    for g in GateKind:
        assert gate_from_name(g.name) is g
        assert gate_from_name(g.name.lower()) is g
    with pytest.raises(ValueError):
        gate_from_name("MAYBE")


def test_truth_tables_read_only():
    with pytest.raises(ValueError):
        TRUTH_TABLES[0, 0] = 1
