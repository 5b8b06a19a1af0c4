"""Tiny infix expression language for right-hand sides ``f_i(x1, ..., xn)``.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

``VAR`` is ``x1`` .. ``x<dim>`` and ``FUNC`` is one of sin, cos, exp, abs.
Evaluation works on plain floats and on numpy arrays of states
(shape ``(..., dim)``) with the same operation order, so batched and
pointwise results agree bitwise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "abs")
UNARY_OPS = ("neg",) + FUNCTIONS
BINARY_OPS = ("add", "sub", "mul", "div", "pow")

_SYMBOL_TO_OP = {"+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow"}
_OP_TO_SYMBOL = {v: k for k, v in _SYMBOL_TO_OP.items()}


class ExprError(ValueError):
    """Raised for malformed expression text."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Binary]


# --------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), _byte_offset(source, pos)))
        pos = m.end()
    tokens.append(_Token("end", "", _byte_offset(source, len(source))))
    return tokens


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


# --------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, source: str, dim: int):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.dim = dim

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind != "op":
            found = self.tok.text or "end of input"
            raise ExprError(f"expected {text!r}, found {found!r}", self.tok.offset)
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ExprError(f"unexpected token {self.tok.text!r}", self.tok.offset)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = _SYMBOL_TO_OP[self.advance().text]
            left = Binary(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = _SYMBOL_TO_OP[self.advance().text]
            left = Binary(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return Binary("pow", base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Const(float(t.text))
        if t.kind == "name":
            self.advance()
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(t.text, arg)
            m = re.fullmatch(r"x([1-9][0-9]*)", t.text)
            if m is None:
                raise ExprError(f"unknown identifier {t.text!r}", t.offset)
            index = int(m.group(1))
            if index > self.dim:
                raise ExprError(
                    f"variable {t.text} out of range for dimension {self.dim}", t.offset
                )
            return Var(index)
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        found = t.text or "end of input"
        raise ExprError(f"unexpected {found!r}", t.offset)


def parse(source: str, dim: int) -> Expr:
    """Parse ``source`` into an expression tree over ``x1..x<dim>``."""
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    return _Parser(source, dim).parse()


# --------------------------------------------------------------------------
# evaluation


def _int_power(base, n: int):
    if n == 0:
        return np.ones_like(base) if isinstance(base, np.ndarray) else 1.0
    result = base
    for _ in range(abs(n) - 1):
        result = result * base
    if n < 0:
        result = 1.0 / result
    return result


def _integer_exponent(node: Expr) -> int | None:
    if isinstance(node, Unary) and node.op == "neg":
        n = _integer_exponent(node.arg)
        return None if n is None else -n
    if isinstance(node, Const) and float(node.value).is_integer():
        return int(node.value)
    return None


_UNARY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}


def evaluate(e: Expr, x):
    """Evaluate ``e`` at a state ``x`` (shape ``(n,)``) or a batch ``(B, n)``.

    Non-finite results (division by zero, overflow, log of a negative base)
    propagate as inf/nan; callers decide whether that is fatal.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(e, x)
    if x.ndim == 1:
        return float(out)
    return np.broadcast_to(out, x.shape[:-1]).astype(float, copy=True)


def _eval(e: Expr, x):
    if isinstance(e, Const):
        return np.float64(e.value)
    if isinstance(e, Var):
        return x[..., e.index - 1]
    if isinstance(e, Unary):
        a = _eval(e.arg, x)
        if e.op == "neg":
            return -a
        return _UNARY_FUNCS[e.op](a)
    # left before right, always
    a = _eval(e.left, x)
    if e.op == "pow":
        n = _integer_exponent(e.right)
        if n is not None:
            return _int_power(a, n)
        # exp(y ln x): nan for x < 0
        return np.exp(_eval(e.right, x) * np.log(a))
    b = _eval(e.right, x)
    if e.op == "add":
        return a + b
    if e.op == "sub":
        return a - b
    if e.op == "mul":
        return a * b
    return a / b


def max_variable(e: Expr) -> int:
    """Largest variable index referenced by ``e`` (0 for constants)."""
    if isinstance(e, Const):
        return 0
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Unary):
        return max_variable(e.arg)
    return max(max_variable(e.left), max_variable(e.right))


def to_text(e: Expr) -> str:
    """Print ``e`` fully parenthesized; ``parse(to_text(e))`` rebuilds ``e``."""
    if isinstance(e, Const):
        if not np.isfinite(e.value) or e.value < 0:
            raise ValueError(f"constant {e.value!r} has no literal form")
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_text(e.arg)})"
        return f"{e.op}({to_text(e.arg)})"
    return f"({to_text(e.left)} {_OP_TO_SYMBOL[e.op]} {to_text(e.right)})"
