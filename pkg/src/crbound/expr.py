"""A small arithmetic language for parameter functions and estimators in model specs.

Grammar (lowest to highest precedence)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?          # right-associative, binds tighter than "-"
    atom  := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

with ``FUNC`` one of ``exp``, ``log``, ``sqrt``, ``abs``. Evaluation accepts
floats or numpy arrays as bindings; domain faults raise instead of
producing NaN.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

from .errors import CRBoundError

MAX_DEPTH = 64
FUNCTIONS = ("exp", "log", "sqrt", "abs")


class ExprError(CRBoundError, ValueError):
    """Parse-time diagnostic carrying a byte offset into the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExprEvalError(CRBoundError, ArithmeticError):
    """Domain fault during evaluation."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class _Token:
    kind: str  # NUM, NAME, OP, LPAREN, RPAREN, EOF
    text: str
    offset: int


_NUMBER_RUN = re.compile(r"[0-9.]+(?:[eE][+-]?[0-9.]*)?")
_NUMBER = re.compile(r"(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i = 0
    byte = 0
    while i < len(source):
        ch = source[i]
        if ch.isspace():
            i += 1
            byte += len(ch.encode())
            continue
        if ch.isdigit() or ch == ".":
            m = _NUMBER_RUN.match(source, i)
            text = m.group()
            if not _NUMBER.fullmatch(text):
                raise ExprError(f"malformed number '{text}'", byte)
            tokens.append(_Token("NUM", text, byte))
        elif ch.isalpha() or ch == "_":
            text = _NAME.match(source, i).group()
            tokens.append(_Token("NAME", text, byte))
        elif ch in "+-*/^":
            text = ch
            tokens.append(_Token("OP", ch, byte))
        elif ch in "()":
            text = ch
            tokens.append(_Token("LPAREN" if ch == "(" else "RPAREN", ch, byte))
        else:
            raise ExprError(f"unexpected character {ch!r}", byte)
        i += len(text)
        byte += len(text.encode())
    tokens.append(_Token("EOF", "", byte))
    return tokens


class _Parser:
    def __init__(self, source: str, allowed: frozenset[str]):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.allowed = allowed
        self.nesting = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def nest(self, tok: _Token):
        self.nesting += 1
        if self.nesting > MAX_DEPTH:
            raise ExprError(f"expression nested deeper than {MAX_DEPTH}", tok.offset)

    def parse(self) -> Expr:
        if self.peek().kind == "EOF":
            raise ExprError("empty expression", 0)
        node = self.expr()
        tok = self.peek()
        if tok.kind == "RPAREN":
            raise ExprError("unbalanced parentheses: unmatched ')'", tok.offset)
        if tok.kind != "EOF":
            raise ExprError(f"unexpected '{tok.text}'", tok.offset)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "OP" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind == "OP" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "-":
            self.advance()
            self.nest(tok)
            node = Neg(self.unary())
            self.nesting -= 1
            return node
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "^":
            self.advance()
            self.nest(tok)
            node = BinOp("^", base, self.unary())
            self.nesting -= 1
            return node
        return base

    def atom(self) -> Expr:
        tok = self.advance()
        if tok.kind == "NUM":
            return Num(float(tok.text))
        if tok.kind == "NAME":
            if tok.text in FUNCTIONS and self.peek().kind == "LPAREN":
                open_tok = self.advance()
                return Call(tok.text, self.parenthesized(open_tok))
            if tok.text not in self.allowed:
                raise ExprError(f"unknown variable '{tok.text}'", tok.offset)
            return Var(tok.text)
        if tok.kind == "LPAREN":
            return self.parenthesized(tok)
        if tok.kind == "EOF":
            raise ExprError("unexpected end of expression", tok.offset)
        if tok.kind == "RPAREN":
            raise ExprError("unbalanced parentheses: unmatched ')'", tok.offset)
        raise ExprError(f"unexpected '{tok.text}'", tok.offset)

    def parenthesized(self, open_tok: _Token) -> Expr:
        self.nest(open_tok)
        node = self.expr()
        self.nesting -= 1
        if self.peek().kind != "RPAREN":
            if self.peek().kind == "EOF":
                raise ExprError("unbalanced parentheses: '(' never closed", open_tok.offset)
            raise ExprError(f"unexpected '{self.peek().text}'", self.peek().offset)
        self.advance()
        return node


def depth(node: Expr) -> int:
    if isinstance(node, (Num, Var)):
        return 1
    if isinstance(node, Neg):
        return 1 + depth(node.operand)
    if isinstance(node, Call):
        return 1 + depth(node.arg)
    return 1 + max(depth(node.left), depth(node.right))


def parse(source: str, allowed_vars: Iterable[str]) -> Expr:
    """Parse ``source``; every variable must be one of ``allowed_vars``."""
    node = _Parser(source, frozenset(allowed_vars)).parse()
    if depth(node) > MAX_DEPTH:
        raise ExprError(f"expression tree deeper than {MAX_DEPTH}", 0)
    return node


def variables(node: Expr) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, Call):
        return variables(node.arg)
    return variables(node.left) | variables(node.right)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM_PREC = 5


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def to_source(node: Expr) -> str:
    """Render with the minimal parentheses needed to reparse to the same tree."""
    if isinstance(node, Num):
        v = float(node.value)
        return str(int(v)) if v.is_integer() and abs(v) < 1e16 else repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        return f"-{inner}" if _prec(node.operand) >= _NEG_PREC else f"-({inner})"
    left, right = to_source(node.left), to_source(node.right)
    if node.op == "^":
        if _prec(node.left) < _ATOM_PREC:
            left = f"({left})"
        if _prec(node.right) < _NEG_PREC:
            right = f"({right})"
        return f"{left}^{right}"
    prec = _PREC[node.op]
    if _prec(node.left) < prec:
        left = f"({left})"
    if _prec(node.right) <= prec:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def _fault(message: str, node: Expr):
    raise ExprEvalError(f"{message} in '{to_source(node)}'")


def _finite(value, node: Expr):
    if not np.all(np.isfinite(value)):
        _fault("non-finite result", node)
    return value


def _eval(node: Expr, env: Mapping[str, object]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ExprEvalError(f"unbound variable '{node.name}'") from None
    if isinstance(node, Neg):
        return -np.asarray(_eval(node.operand, env), dtype=float)
    if isinstance(node, Call):
        x = np.asarray(_eval(node.arg, env), dtype=float)
        if node.func == "log":
            if np.any(x <= 0):
                _fault("log of a nonpositive argument", node)
            return np.log(x)
        if node.func == "sqrt":
            if np.any(x < 0):
                _fault("sqrt of a negative argument", node)
            return np.sqrt(x)
        if node.func == "exp":
            with np.errstate(over="ignore"):
                return _finite(np.exp(x), node)
        return np.abs(x)
    a = np.asarray(_eval(node.left, env), dtype=float)
    b = np.asarray(_eval(node.right, env), dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = a * b
        elif node.op == "/":
            if np.any(b == 0):
                _fault("division by zero", node)
            out = a / b
        else:
            a, b = np.broadcast_arrays(a, b)
            integral = b == np.round(b)
            if np.any(~integral & (a <= 0)):
                _fault("non-integer power of a nonpositive base", node)
            if np.any((a == 0) & (b < 0)):
                _fault("zero raised to a negative power", node)
            out = np.power(a, b)
    return _finite(out, node)


def evaluate(node: Expr, bindings: Mapping[str, object]):
    """Evaluate ``node``; returns a float for scalar bindings, an array for array bindings."""
    out = np.asarray(_eval(node, bindings), dtype=float)
    return float(out) if out.ndim == 0 else out


def compile_expr(source: str, allowed_vars: Iterable[str]):
    """Parse once and return a callable taking keyword bindings."""
    tree = parse(source, allowed_vars)
    return lambda **kw: evaluate(tree, kw)
