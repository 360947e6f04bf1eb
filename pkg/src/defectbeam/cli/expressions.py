"""Single-variable expressions in ``x``: literals, + - * / ^, parentheses, sin, cos, exp, pi.

``^`` is right-associative and binds tighter than unary minus, so
``-x^2`` means ``-(x^2)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np
import sympy

from ..core import InvalidParameterError

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_SYMPY_FUNCTIONS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp}
CONSTANTS = {"pi": np.pi}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


class ExpressionError(InvalidParameterError):
    """Syntax error or unknown identifier, with a 1-based column."""

    def __init__(self, message: str, column: int, source: str = ""):
        super().__init__(f"{message} at column {column}")
        self.column = column
        self.source = source


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"


Node = Union[Num, Var, Const, Unary, Binary, Call]


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            col = pos + len(src[pos:]) - len(src[pos:].lstrip()) + 1
            raise ExpressionError(f"unexpected character {src[col - 1]!r}", col, src)
        kind = m.lastgroup
        start = m.start(kind) + 1
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src) + 1))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, col = self.take()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionError(f"expected {value!r}, found {found}", col, self.src)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, col = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {text!r}", col, self.src)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            return Unary(op, self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, col = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text == "x":
                return Var()
            if text in CONSTANTS:
                return Const(text)
            if text in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ExpressionError(f"function {text!r} needs an argument", self.peek()[2], self.src)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            raise ExpressionError(f"unknown identifier {text!r}", col, self.src)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionError(f"unexpected {found}", col, self.src)


def _eval(node: Node, x: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full_like(x, node.value)
    if isinstance(node, Var):
        return x
    if isinstance(node, Const):
        return np.full_like(x, CONSTANTS[node.name])
    if isinstance(node, Unary):
        v = _eval(node.arg, x)
        return -v if node.op == "-" else v
    if isinstance(node, Call):
        return FUNCTIONS[node.name](_eval(node.arg, x))
    a, b = _eval(node.left, x), _eval(node.right, x)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return np.power(a, b)


def _sympy(node: Node, x: sympy.Symbol):
    if isinstance(node, Num):
        v = node.value
        return sympy.Integer(int(v)) if v.is_integer() else sympy.Float(v, 17)
    if isinstance(node, Var):
        return x
    if isinstance(node, Const):
        return sympy.pi
    if isinstance(node, Unary):
        v = _sympy(node.arg, x)
        return -v if node.op == "-" else v
    if isinstance(node, Call):
        return _SYMPY_FUNCTIONS[node.name](_sympy(node.arg, x))
    a, b = _sympy(node.left, x), _sympy(node.right, x)
    return {"+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
            "/": lambda: a / b, "^": lambda: a**b}[node.op]()


def _canonical(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Unary):
        return f"({node.op}{_canonical(node.arg)})"
    if isinstance(node, Call):
        return f"{node.name}({_canonical(node.arg)})"
    return f"({_canonical(node.left)}{node.op}{_canonical(node.right)})"


class Expression:
    """A parsed expression; call it with scalars or arrays of x."""

    def __init__(self, source: str):
        self.source = source
        self.tree = _Parser(source).parse()

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        out = _eval(self.tree, np.atleast_1d(arr).astype(float))
        return out.reshape(arr.shape) if arr.ndim else float(out[0])

    def to_sympy(self, x: sympy.Symbol):
        return _sympy(self.tree, x)

    @property
    def canonical(self) -> str:
        """Whitespace- and parenthesis-insensitive form, used for hashing."""
        return _canonical(self.tree)

    def __repr__(self) -> str:
        return f"Expression({self.source!r})"


def parse_expression(src: str) -> Expression:
    if not isinstance(src, str):
        raise InvalidParameterError("expression must be a string")
    return Expression(src)
