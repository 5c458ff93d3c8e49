"""Arithmetic expression language shared by test sequences and assessments.

The concrete syntax covers decimal literals, bare identifiers (search
parameters or trace channels, depending on context), the zero-argument
time functions ``sim_time()`` and ``step_time()``, the four binary
operators ``+ - * /``, unary minus, and parentheses.  Expressions are
parsed once into a small immutable AST and evaluated either on scalars
or on numpy arrays (one value per grid sample).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

Value = Union[float, np.ndarray]

TIME_FUNCTIONS = ("sim_time", "step_time")


class ExpressionError(ValueError):
    """Raised for unparsable expressions or failures during evaluation."""


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class TimeCall:
    func: str  # "sim_time" | "step_time"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    lhs: "Expr"
    rhs: "Expr"


Expr = Union[Const, Name, TimeCall, Neg, BinOp]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<sym><=|>=|[-+*/()<>]))"
)


def tokenize(text: str) -> list[str]:
    """Split *text* into expression tokens, rejecting anything unknown."""
    tokens: list[str] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ExpressionError(f"unexpected character {text[pos]!r} in {text!r}")
        tokens.append(m.group(0).strip())
        pos = m.end()
    return tokens


class _Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, tokens: list[str], source: str):
        self.tokens = tokens
        self.source = source
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ExpressionError(f"unexpected end of expression in {self.source!r}")
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.take()
        if got != tok:
            raise ExpressionError(f"expected {tok!r} but found {got!r} in {self.source!r}")

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek() in ("+", "-"):
            op = self.take()
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.peek() in ("*", "/"):
            op = self.take()
            node = BinOp(op, node, self.parse_factor())
        return node

    def parse_factor(self) -> Expr:
        tok = self.take()
        if tok == "-":
            return Neg(self.parse_factor())
        if tok == "+":
            return self.parse_factor()
        if tok == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            if self.peek() == "(":
                self.take()
                self.expect(")")
                if tok not in TIME_FUNCTIONS:
                    raise ExpressionError(f"unknown function {tok!r} in {self.source!r}")
                return TimeCall(tok)
            return Name(tok)
        try:
            return Const(float(tok))
        except ValueError:
            raise ExpressionError(f"unexpected token {tok!r} in {self.source!r}") from None


def parse_expression(text: str) -> Expr:
    """Parse the concrete syntax into an AST."""
    parser = _Parser(tokenize(text), text)
    node = parser.parse_expr()
    if parser.peek() is not None:
        raise ExpressionError(f"trailing input {parser.peek()!r} in {text!r}")
    return node


def referenced_names(expr: Expr) -> set[str]:
    """All bare identifiers appearing in *expr*."""
    if isinstance(expr, Name):
        return {expr.ident}
    if isinstance(expr, Neg):
        return referenced_names(expr.operand)
    if isinstance(expr, BinOp):
        return referenced_names(expr.lhs) | referenced_names(expr.rhs)
    return set()


def uses_time(expr: Expr) -> bool:
    if isinstance(expr, TimeCall):
        return True
    if isinstance(expr, Neg):
        return uses_time(expr.operand)
    if isinstance(expr, BinOp):
        return uses_time(expr.lhs) or uses_time(expr.rhs)
    return False


def constant_zero_divisions(expr: Expr) -> list[str]:
    """Diagnostics for divisions whose divisor is the literal constant 0."""
    found: list[str] = []
    if isinstance(expr, BinOp):
        if expr.op == "/":
            rhs = expr.rhs
            if isinstance(rhs, Neg) and isinstance(rhs.operand, Const):
                rhs = Const(-rhs.operand.value)
            if isinstance(rhs, Const) and rhs.value == 0.0:
                found.append("division by constant 0")
        found.extend(constant_zero_divisions(expr.lhs))
        found.extend(constant_zero_divisions(expr.rhs))
    elif isinstance(expr, Neg):
        found.extend(constant_zero_divisions(expr.operand))
    return found


def substitute(expr: Expr, values: Mapping[str, float]) -> Expr:
    """Replace every ``Name`` present in *values* with a constant."""
    if isinstance(expr, Name) and expr.ident in values:
        return Const(float(values[expr.ident]))
    if isinstance(expr, Neg):
        return Neg(substitute(expr.operand, values))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, substitute(expr.lhs, values), substitute(expr.rhs, values))
    return expr


def evaluate(
    expr: Expr,
    names: Mapping[str, Value] | None = None,
    sim_time: Value | None = None,
    step_time: Value | None = None,
) -> Value:
    """Evaluate *expr* against name bindings and the two time sources.

    Scalars and numpy arrays mix freely (arrays broadcast).  Division by
    zero raises :class:`ExpressionError` instead of producing inf/NaN.
    """
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Name):
        if names is None or expr.ident not in names:
            raise ExpressionError(f"unbound identifier {expr.ident!r}")
        return names[expr.ident]
    if isinstance(expr, TimeCall):
        source = sim_time if expr.func == "sim_time" else step_time
        if source is None:
            raise ExpressionError(f"{expr.func}() is not available in this context")
        return source
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, names, sim_time, step_time)
    if isinstance(expr, BinOp):
        lhs = evaluate(expr.lhs, names, sim_time, step_time)
        rhs = evaluate(expr.rhs, names, sim_time, step_time)
        if expr.op == "+":
            return lhs + rhs
        if expr.op == "-":
            return lhs - rhs
        if expr.op == "*":
            return lhs * rhs
        if np.any(np.asarray(rhs) == 0.0):
            raise ExpressionError("division by zero during evaluation")
        return lhs / rhs
    raise ExpressionError(f"unknown expression node {expr!r}")
