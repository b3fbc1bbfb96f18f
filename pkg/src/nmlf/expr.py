"""Scalar math expressions over named state variables.

Grammar (infix, standard precedence, tightest first):

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" INTEGER)*
    atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

Identifiers match ``[A-Za-z_][A-Za-z0-9_]*`` and must resolve to a declared
state variable, a supplied constant (folded to a literal at parse time), or
one of the functions sin, cos, tan, exp, abs. Exponents are literal
non-negative integers so interval evaluation stays exact.

Parsed trees are immutable and safe to evaluate concurrently. Evaluation is
provided at real points (IEEE double), over vectorized point batches, and
over interval boxes (sound enclosures via :mod:`nmlf.intervals`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import intervals as iv
from .intervals import EnclosureError, Interval

FUNCTIONS = ("sin", "cos", "tan", "exp", "abs")


class ExprError(ValueError):
    """Base class for expression parse/evaluation failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"syntax error at offset {position}: {message}")
        self.position = position


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier '{name}' at offset {position}")
        self.name = name
        self.position = position


class NonIntegerExponentError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"invalid exponent at offset {position}: {message}")
        self.position = position


class EvalError(ExprError):
    """Point evaluation failed (division by zero)."""


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # neg | sin | cos | tan | exp | abs
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * /
    lhs: "Node"
    rhs: "Node"


@dataclass(frozen=True)
class Power:
    base: "Node"
    exponent: int


Node = Num | Var | Unary | Binary | Power

_UNARY_FN = {
    "neg": lambda x: -x,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "abs": np.abs,
}

_UNARY_IV = {
    "neg": iv.ineg,
    "sin": iv.isin,
    "cos": iv.icos,
    "tan": iv.itan,
    "exp": iv.iexp,
    "abs": iv.iabs,
}


@dataclass(frozen=True)
class Expr:
    """A parsed expression bound to an ordered state-variable list."""

    root: Node
    variables: tuple[str, ...]
    source: str

    def __call__(self, x) -> float:
        return eval_point(self, x)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # num | ident | op | end
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in "+-*/^()":
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ExprSyntaxError(f"malformed number '{text}'", i) from None
            tokens.append(_Token("num", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character '{c}'", i)
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str, variables: Sequence[str], constants: Mapping[str, float]):
        self.source = source
        self.tokens = _tokenize(source)
        self.k = 0
        self.var_index = {name: i for i, name in enumerate(variables)}
        self.constants = dict(constants)

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def advance(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect_op(self, text: str) -> None:
        tok = self.advance()
        if tok.kind != "op" or tok.text != text:
            raise ExprSyntaxError(f"expected '{text}'", tok.pos)

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected '{tok.text}'", tok.pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = _fold_binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = _fold_binary(op, node, self.factor())
        return node

    def factor(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return _fold_unary("neg", self.factor())
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        while self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            tok = self.advance()
            if tok.kind != "num":
                raise NonIntegerExponentError("exponent must be a non-negative integer literal", tok.pos)
            value = float(tok.text)
            if value != int(value):
                raise NonIntegerExponentError(f"'{tok.text}' is not an integer", tok.pos)
            node = _fold_power(node, int(value))
        return node

    def atom(self) -> Node:
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "ident":
            if self.peek().kind == "op" and self.peek().text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnknownIdentifierError(tok.text, tok.pos)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return _fold_unary(tok.text, arg)
            if tok.text in self.var_index:
                return Var(self.var_index[tok.text], tok.text)
            if tok.text in self.constants:
                return Num(float(self.constants[tok.text]))
            raise UnknownIdentifierError(tok.text, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if tok.kind == "end":
            raise ExprSyntaxError("unexpected end of input", tok.pos)
        raise ExprSyntaxError(f"unexpected '{tok.text}'", tok.pos)


def _fold_unary(op: str, arg: Node) -> Node:
    if isinstance(arg, Num):
        return Num(float(_UNARY_FN[op](arg.value)))
    return Unary(op, arg)


def _fold_binary(op: str, lhs: Node, rhs: Node) -> Node:
    if isinstance(lhs, Num) and isinstance(rhs, Num):
        if op == "+":
            return Num(lhs.value + rhs.value)
        if op == "-":
            return Num(lhs.value - rhs.value)
        if op == "*":
            return Num(lhs.value * rhs.value)
        if rhs.value != 0.0:  # leave 1/0 to fail at evaluation
            return Num(lhs.value / rhs.value)
    return Binary(op, lhs, rhs)


def _fold_power(base: Node, exponent: int) -> Node:
    if exponent < 0:
        raise NonIntegerExponentError("exponent must be >= 0", 0)
    if isinstance(base, Num):
        return Num(base.value ** exponent)
    return Power(base, exponent)


def parse(source: str, variables: Sequence[str], constants: Mapping[str, float] | None = None) -> Expr:
    """Parse an infix expression over the given state variables.

    Constants are substituted and folded into literals, so the resulting
    tree references only state variables and numbers.
    """
    parser = _Parser(source, variables, constants or {})
    return Expr(parser.parse(), tuple(variables), source)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _eval(node: Node, cols) -> np.ndarray | float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return cols[node.index]
    if isinstance(node, Unary):
        return _UNARY_FN[node.op](_eval(node.arg, cols))
    if isinstance(node, Power):
        return _eval(node.base, cols) ** node.exponent
    lhs = _eval(node.lhs, cols)
    rhs = _eval(node.rhs, cols)
    if node.op == "+":
        return lhs + rhs
    if node.op == "-":
        return lhs - rhs
    if node.op == "*":
        return lhs * rhs
    if np.any(np.asarray(rhs) == 0.0):
        raise EvalError(f"division by zero in '{node.op}' while evaluating")
    return lhs / rhs


def eval_point(e: Expr, x: Sequence[float]) -> float:
    """Evaluate at a single point (IEEE double precision)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (len(e.variables),):
        raise ValueError(f"expected {len(e.variables)} coordinates, got shape {x.shape}")
    return float(_eval(e.root, x))


def eval_batch(e: Expr, X: np.ndarray) -> np.ndarray:
    """Evaluate at an (B, n) batch of points, returning shape (B,)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(e.variables):
        raise ValueError(f"expected (B, {len(e.variables)}) batch, got shape {X.shape}")
    out = _eval(e.root, [X[:, i] for i in range(X.shape[1])])
    return np.broadcast_to(np.asarray(out, dtype=float), (X.shape[0],)).copy()


def _eval_iv(node: Node, lo_cols, hi_cols):
    if isinstance(node, Num):
        return node.value, node.value
    if isinstance(node, Var):
        return lo_cols[node.index], hi_cols[node.index]
    if isinstance(node, Unary):
        al, ah = _eval_iv(node.arg, lo_cols, hi_cols)
        return _UNARY_IV[node.op](np.asarray(al, dtype=float), np.asarray(ah, dtype=float))
    if isinstance(node, Power):
        al, ah = _eval_iv(node.base, lo_cols, hi_cols)
        return iv.ipow(np.asarray(al, dtype=float), np.asarray(ah, dtype=float), node.exponent)
    al, ah = _eval_iv(node.lhs, lo_cols, hi_cols)
    bl, bh = _eval_iv(node.rhs, lo_cols, hi_cols)
    al, ah = np.asarray(al, dtype=float), np.asarray(ah, dtype=float)
    bl, bh = np.asarray(bl, dtype=float), np.asarray(bh, dtype=float)
    if node.op == "+":
        return iv.iadd(al, ah, bl, bh)
    if node.op == "-":
        return iv.isub(al, ah, bl, bh)
    if node.op == "*":
        return iv.imul(al, ah, bl, bh)
    return iv.idiv(al, ah, bl, bh)


def eval_interval_arrays(e: Expr, lo: np.ndarray, hi: np.ndarray):
    """Enclosure over a batch of boxes given as (K, n) bound arrays."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = len(e.variables)
    rl, rh = _eval_iv(e.root, [lo[..., i] for i in range(n)], [hi[..., i] for i in range(n)])
    shape = lo.shape[:-1]
    rl = np.broadcast_to(np.asarray(rl, dtype=float), shape).copy()
    rh = np.broadcast_to(np.asarray(rh, dtype=float), shape).copy()
    return rl, rh


def eval_interval(e: Expr, box: Sequence[Interval]) -> Interval:
    """Sound enclosure of the expression's range over an axis-aligned box."""
    if len(box) != len(e.variables):
        raise ValueError(f"expected {len(e.variables)} intervals, got {len(box)}")
    lo = np.asarray([b.lo for b in box], dtype=float)
    hi = np.asarray([b.hi for b in box], dtype=float)
    rl, rh = eval_interval_arrays(e, lo, hi)
    return Interval(float(rl), float(rh))
