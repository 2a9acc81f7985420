"""The sixteen two-input boolean gates and their real-valued relaxations.

Gate codes follow the truth-table-as-binary-number convention: the output bits
for inputs (a, b) = (0,0), (0,1), (1,0), (1,1), read most-significant first,
spell out the code. ``AND`` is ``0b0001 = 1``, ``OR`` is ``0b0111 = 7``.

| code | name           | expression      | relaxation        | 00 01 10 11 |
|------|----------------|-----------------|-------------------|-------------|
| 0    | FALSE          | 0               | 0                 | 0  0  0  0  |
| 1    | AND            | a and b         | ab                | 0  0  0  1  |
| 2    | A_NIMPLIES_B   | not(a -> b)     | a - ab            | 0  0  1  0  |
| 3    | A              | a               | a                 | 0  0  1  1  |
| 4    | B_NIMPLIES_A   | not(b -> a)     | b - ab            | 0  1  0  0  |
| 5    | B              | b               | b                 | 0  1  0  1  |
| 6    | XOR            | a xor b         | a + b - 2ab       | 0  1  1  0  |
| 7    | OR             | a or b          | a + b - ab        | 0  1  1  1  |
| 8    | NOR            | not(a or b)     | 1 - (a + b - ab)  | 1  0  0  0  |
| 9    | XNOR           | not(a xor b)    | 1 - (a + b - 2ab) | 1  0  0  1  |
| 10   | NOT_B          | not b           | 1 - b             | 1  0  1  0  |
| 11   | B_IMPLIES_A    | b -> a          | 1 - b + ab        | 1  0  1  1  |
| 12   | NOT_A          | not a           | 1 - a             | 1  1  0  0  |
| 13   | A_IMPLIES_B    | a -> b          | 1 - a + ab        | 1  1  0  1  |
| 14   | NAND           | not(a and b)    | 1 - ab            | 1  1  1  0  |
| 15   | TRUE           | 1               | 1                 | 1  1  1  1  |

Gate ``k`` and gate ``15 - k`` are complements. The upper half of the table is
evaluated as ``1 - relax(15 - k)``, which is algebraically identical to the
formulas above and makes the negation pairing hold bit for bit.
"""

from __future__ import annotations

import enum
from typing import Sequence

import numpy as np

__all__ = [
    "GateKind",
    "CORNERS",
    "TRUTH_TABLES",
    "corner_basis",
    "gate_from_name",
    "gate_from_truth_table",
    "relax",
    "relax_array",
    "truth_table",
]


class GateKind(enum.IntEnum):
    FALSE = 0
    AND = 1
    A_NIMPLIES_B = 2
    A = 3
    B_NIMPLIES_A = 4
    B = 5
    XOR = 6
    OR = 7
    NOR = 8
    XNOR = 9
    NOT_B = 10
    B_IMPLIES_A = 11
    NOT_A = 12
    A_IMPLIES_B = 13
    NAND = 14
    TRUE = 15

    @property
    def negation(self) -> "GateKind":
        return GateKind(15 - self.value)

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]


_SYMBOLS = {
    GateKind.FALSE: "False",
    GateKind.AND: "A∧B",
    GateKind.A_NIMPLIES_B: "¬(A⇒B)",
    GateKind.A: "A",
    GateKind.B_NIMPLIES_A: "¬(A⇐B)",
    GateKind.B: "B",
    GateKind.XOR: "A⊕B",
    GateKind.OR: "A∨B",
    GateKind.NOR: "¬(A∨B)",
    GateKind.XNOR: "¬(A⊕B)",
    GateKind.NOT_B: "¬B",
    GateKind.B_IMPLIES_A: "A⇐B",
    GateKind.NOT_A: "¬A",
    GateKind.A_IMPLIES_B: "A⇒B",
    GateKind.NAND: "¬(A∧B)",
    GateKind.TRUE: "True",
}

#: Binary input corners in truth-table order.
CORNERS: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))

#: ``TRUTH_TABLES[k, i]`` is gate k's output at ``CORNERS[i]``.
TRUTH_TABLES = np.array(
    [[(k >> (3 - i)) & 1 for i in range(4)] for k in range(16)], dtype=np.uint8
)
TRUTH_TABLES.setflags(write=False)


def truth_table(gate: GateKind | int) -> tuple[int, int, int, int]:
    k = GateKind(gate)
    return tuple(int(v) for v in TRUTH_TABLES[k])  # type: ignore[return-value]


def gate_from_truth_table(tt: Sequence[int]) -> GateKind:
    """Return the gate whose outputs at the four corners are ``tt``."""
    if len(tt) != 4:
        raise ValueError(f"truth table needs 4 entries, got {len(tt)}")
    code = 0
    for bit in tt:
        if bit not in (0, 1, True, False):
            raise ValueError(f"truth table entries must be 0 or 1, got {bit!r}")
        code = (code << 1) | int(bit)
    return GateKind(code)


def gate_from_name(name: str) -> GateKind:
    try:
        return GateKind[name.upper()]
    except KeyError:
        raise ValueError(f"unknown gate name {name!r}") from None


_LOWER = (
    lambda a, b: 0.0 * a,
    lambda a, b: a * b,
    lambda a, b: a - a * b,
    lambda a, b: a + 0.0 * b,
    lambda a, b: b - a * b,
    lambda a, b: b + 0.0 * a,
    lambda a, b: a + b - 2 * a * b,
    lambda a, b: a + b - a * b,
)


def _relax_unchecked(code, a, b):
    if code < 8:
        return _LOWER[code](a, b)
    return 1.0 - _LOWER[15 - code](a, b)


def relax(gate: GateKind | int, a: float, b: float) -> float:
    """Real-valued relaxation of ``gate`` at ``(a, b)`` in [0, 1]^2."""
    k = GateKind(gate)
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise ValueError(f"inputs must lie in [0, 1], got a={a!r}, b={b!r}")
    out = float(_relax_unchecked(int(k), float(a), float(b)))
    # a + b - 2ab and friends can dip an ulp outside the unit interval
    return min(1.0, max(0.0, out))


def relax_array(gate: GateKind | int, a, b) -> np.ndarray:
    """Vectorized :func:`relax` without range checks."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = _relax_unchecked(int(GateKind(gate)), a, b)
    return np.clip(np.broadcast_to(out, np.broadcast(a, b).shape), 0.0, 1.0)


def corner_basis(a, b) -> np.ndarray:
    """Bilinear weights of the four corners, stacked on a trailing axis.

    Every relaxation above equals ``corner_basis(a, b) @ TRUTH_TABLES[k]``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = 1.0 - a, 1.0 - b
    return np.stack([na * nb, na * b, a * nb, a * b], axis=-1)
