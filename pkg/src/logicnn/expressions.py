"""Boolean expression export for discrete circuits, and a parser to check it.

Exported text is line oriented::

    # comment
    n3_17 = x0 AND NOT x4
    y0 = n3_17 OR (x2 XOR n3_17)

``nL_J = ...`` lines define shared or oversized intermediate neurons and
always precede their first use; ``yK = ...`` gives output neuron K.

Grammar (one binary operator per parenthesis level, ``NOT`` binds tightest)::

    line   := NAME '=' expr
    expr   := unary [BINOP unary]
    unary  := 'NOT' unary | '(' expr ')' | 'TRUE' | 'FALSE' | NAME
    BINOP  := AND | OR | XOR | NAND | NOR | XNOR | IMPLIES
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .discrete import DiscreteCircuit, neuron_id
from .gates import TRUTH_TABLES

BINOPS = ("AND", "OR", "XOR", "NAND", "NOR", "XNOR", "IMPLIES")
KEYWORDS = frozenset(BINOPS + ("NOT", "TRUE", "FALSE"))
_RESERVED = re.compile(r"^(n\d+_\d+|y\d+)$")
_NAME = re.compile(r"^[^\s()#]+$")

# gates that depend on both inputs: code -> (operator, negate a, negate b, swap)
_BINARY_FORMS = {
    1: ("AND", False, False, False),
    2: ("AND", False, True, False),
    4: ("AND", True, False, False),
    6: ("XOR", False, False, False),
    7: ("OR", False, False, False),
    8: ("NOR", False, False, False),
    9: ("XNOR", False, False, False),
    11: ("IMPLIES", False, False, True),
    13: ("IMPLIES", False, False, False),
    14: ("NAND", False, False, False),
}
_OP_EVAL = {
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
    "XOR": lambda a, b: a ^ b,
    "NAND": lambda a, b: ~(a & b),
    "NOR": lambda a, b: ~(a | b),
    "XNOR": lambda a, b: ~(a ^ b),
    "IMPLIES": lambda a, b: ~a | b,
}


@dataclass(eq=False)
class Expr:
    kind: str  # const | var | not | bin
    value: object = None  # bit, name or operator
    args: tuple["Expr", ...] = ()
    origin: str | None = None

    @property
    def atomic(self) -> bool:
        return self.kind in ("const", "var")


TRUE_EXPR = Expr("const", 1)
FALSE_EXPR = Expr("const", 0)


def _const(bit: int) -> Expr:
    return TRUE_EXPR if bit else FALSE_EXPR


def _negate(e: Expr, origin: str | None) -> Expr:
    if e.kind == "const":
        return _const(1 - e.value)
    if e.kind == "not":
        return e.args[0]
    return Expr("not", args=(e,), origin=origin)


def _unary(bits: tuple[int, int], e: Expr, origin: str) -> Expr:
    """The function x -> bits[x] applied to ``e``."""
    if bits[0] == bits[1]:
        return _const(bits[0])
    return e if bits == (0, 1) else _negate(e, origin)


def _apply_gate(code: int, a: Expr, b: Expr, origin: str) -> Expr:
    tt = TRUTH_TABLES[code]
    if a.kind == "const" and b.kind == "const":
        return _const(int(tt[2 * a.value + b.value]))
    if a.kind == "const":
        return _unary((int(tt[2 * a.value]), int(tt[2 * a.value + 1])), b, origin)
    if b.kind == "const":
        return _unary((int(tt[b.value]), int(tt[2 + b.value])), a, origin)
    if a is b:
        return _unary((int(tt[0]), int(tt[3])), a, origin)
    if code in (3, 5, 10, 12):  # A, B, NOT_B, NOT_A
        keep = a if code in (3, 12) else b
        return keep if code in (3, 5) else _negate(keep, origin)
    if code in (0, 15):
        return _const(code // 15)
    op, neg_a, neg_b, swap = _BINARY_FORMS[code]
    if neg_a:
        a = _negate(a, None)
    if neg_b:
        b = _negate(b, None)
    if swap:
        a, b = b, a
    return Expr("bin", op, (a, b), origin)


def _check_names(names: Sequence[str]) -> None:
    if len(set(names)) != len(names):
        raise ValueError("input names must be unique")
    for n in names:
        if n.upper() in KEYWORDS or _RESERVED.match(n) or not _NAME.match(n):
            raise ValueError(f"input name {n!r} is reserved or not a valid identifier")


def build_expressions(c: DiscreteCircuit, input_names: Sequence[str]) -> list[Expr]:
    prev = [Expr("var", name) for name in input_names]
    for layer, (g, lo, hi) in enumerate(zip(c.gates, c.left, c.right)):
        prev = [
            _apply_gate(int(g[j]), prev[lo[j]], prev[hi[j]], neuron_id(layer, j))
            for j in range(g.size)
        ]
    return prev


def _render(e: Expr, named: Mapping[int, str], top: bool = False) -> str:
    if id(e) in named and not top:
        return named[id(e)]
    if e.kind == "const":
        return "TRUE" if e.value else "FALSE"
    if e.kind == "var":
        return e.value
    if e.kind == "not":
        return "NOT " + _render(e.args[0], named)
    text = f"{_render(e.args[0], named)} {e.value} {_render(e.args[1], named)}"
    return text if top else f"({text})"


def export_expressions(c: DiscreteCircuit, input_names: Sequence[str] | None = None,
                       node_budget: int | None = 64, share: bool = True) -> str:
    """One expression per output neuron, with True/False gates folded away.

    Intermediate neurons become named definitions when they feed more than one
    consumer (``share``) or when inlining them would exceed ``node_budget``
    operators. ``node_budget=None`` and ``share=False`` inline everything.
    """
    names = list(input_names) if input_names is not None else [f"x{i}" for i in range(c.input_width)]
    if len(names) != c.input_width:
        raise ValueError(f"need {c.input_width} input names, got {len(names)}")
    _check_names(names)
    outputs = build_expressions(c, names)

    refs: dict[int, int] = {}
    order: list[Expr] = []  # post-order, children first
    seen: set[int] = set()

    def visit(e: Expr) -> None:
        refs[id(e)] = refs.get(id(e), 0) + 1
        if id(e) in seen:
            return
        seen.add(id(e))
        for child in e.args:
            visit(child)
        order.append(e)

    for e in outputs:
        visit(e)

    named: dict[int, str] = {}
    size: dict[int, int] = {}
    used_names: set[str] = set()
    for e in order:
        if e.atomic:
            size[id(e)] = 0
            continue
        s = 1 + sum(0 if id(ch) in named else size[id(ch)] for ch in e.args)
        size[id(e)] = s
        shared = share and refs[id(e)] > 1
        too_big = node_budget is not None and s > node_budget
        if (shared or too_big) and e.origin is not None and e.origin not in used_names:
            named[id(e)] = e.origin
            used_names.add(e.origin)

    lines = [f"# {len(outputs)} outputs over {c.input_width} inputs"]
    for e in order:
        if id(e) in named:
            lines.append(f"{named[id(e)]} = {_render(e, named, top=True)}")
    for k, e in enumerate(outputs):
        lines.append(f"y{k} = {_render(e, named, top=True)}")
    return "\n".join(lines) + "\n"


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")


def _tokenize(s: str) -> list[str]:
    tokens, pos = [], 0
    s = s.rstrip()
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m:
            raise ValueError(f"cannot tokenize {s[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


@dataclass
class _Parser:
    tokens: list[str]
    pos: int = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ValueError("unexpected end of expression")
        self.pos += 1
        return tok

    def expr(self):
        left = self.unary()
        if self.peek() in BINOPS:
            op = self.take()
            right = self.unary()
            if self.peek() in BINOPS:
                raise ValueError("chained operators need parentheses")
            return ("bin", op, left, right)
        return left

    def unary(self):
        tok = self.take()
        if tok == "NOT":
            return ("not", self.unary())
        if tok == "(":
            inner = self.expr()
            if self.take() != ")":
                raise ValueError("expected ')'")
            return inner
        if tok in ("TRUE", "FALSE"):
            return ("const", int(tok == "TRUE"))
        if tok in KEYWORDS or tok == ")":
            raise ValueError(f"unexpected token {tok!r}")
        return ("var", tok)


@dataclass
class ParsedExpressions:
    definitions: list[tuple[str, tuple]] = field(default_factory=list)
    outputs: list[tuple] = field(default_factory=list)


def parse_expressions(text: str) -> ParsedExpressions:
    parsed = ParsedExpressions()
    outputs: dict[int, tuple] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, body = line.partition("=")
        name = name.strip()
        if not sep or not name:
            raise ValueError(f"line {lineno}: expected 'NAME = expr'")
        p = _Parser(_tokenize(body))
        try:
            tree = p.expr()
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if p.peek() is not None:
            raise ValueError(f"line {lineno}: trailing tokens after expression")
        m = re.match(r"^y(\d+)$", name)
        if m:
            outputs[int(m.group(1))] = tree
        else:
            parsed.definitions.append((name, tree))
    if sorted(outputs) != list(range(len(outputs))):
        raise ValueError("output indices must be contiguous from y0")
    parsed.outputs = [outputs[k] for k in range(len(outputs))]
    return parsed


def _eval_tree(tree, env, n):
    kind = tree[0]
    if kind == "const":
        return np.full(n, bool(tree[1]))
    if kind == "var":
        try:
            return env[tree[1]]
        except KeyError:
            raise ValueError(f"undefined name {tree[1]!r}") from None
    if kind == "not":
        return ~_eval_tree(tree[1], env, n)
    return _OP_EVAL[tree[1]](_eval_tree(tree[2], env, n), _eval_tree(tree[3], env, n))


def evaluate_expressions(text: str, input_names: Sequence[str], x) -> np.ndarray:
    """Evaluate exported text on a (samples, inputs) bit matrix."""
    parsed = parse_expressions(text)
    x = np.atleast_2d(np.asarray(x)).astype(bool)
    if x.shape[1] != len(input_names):
        raise ValueError("input width does not match the names given")
    env = {name: x[:, i] for i, name in enumerate(input_names)}
    n = x.shape[0]
    for name, tree in parsed.definitions:
        env[name] = _eval_tree(tree, env, n)
    cols = [_eval_tree(t, env, n) for t in parsed.outputs]
    return np.stack(cols, axis=1).astype(np.uint8) if cols else np.zeros((n, 0), np.uint8)


__all__ = [
    "Expr",
    "ParsedExpressions",
    "build_expressions",
    "evaluate_expressions",
    "export_expressions",
    "parse_expressions",
]
