"""A small expression language for coefficient functions.

Grammar (loosest binding first)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | "+" unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

so ``^`` is right-associative and binds tighter than unary minus
(``-x^2 == -(x^2)``, ``2^-1 == 0.5``).  Names are the declared variables, the
constant ``pi`` and the functions ``sin cos exp sqrt abs``.  Evaluation is
vectorized over numpy arrays.

Parsed expressions print back to a fully parenthesized canonical form that
parses to the same tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import SpecMeasureError

__all__ = [
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownIdentifierError",
    "Expression",
    "parse_expression",
    "Num",
    "Var",
    "Const",
    "Neg",
    "BinOp",
    "Call",
]

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
CONSTANTS = {"pi": np.pi}


class ExpressionError(SpecMeasureError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class ExpressionSyntaxError(ExpressionError):
    pass


class UnknownIdentifierError(ExpressionError):
    pass


# -- AST -----------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float

    def eval(self, env):
        return self.value

    def __str__(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Var:
    name: str

    def eval(self, env):
        return env[self.name]

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def eval(self, env):
        return CONSTANTS[self.name]

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg:
    operand: "Node"

    def eval(self, env):
        return -self.operand.eval(env)

    def __str__(self):
        return f"(-{self.operand})"


_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"

    def eval(self, env):
        a = self.left.eval(env)
        b = self.right.eval(env)
        if self.op == "^":
            return np.power(np.asarray(a, dtype=float), b)
        return _BINARY[self.op](a, b)

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"

    def eval(self, env):
        return FUNCTIONS[self.name](self.arg.eval(env))

    def __str__(self):
        return f"{self.name}({self.arg})"


Node = Union[Num, Var, Const, Neg, BinOp, Call]


# -- lexer ---------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    byte = lambda i: len(text[:i].encode("utf-8"))
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", byte(pos))
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), byte(pos)))
        pos = m.end()
    toks.append(_Tok("end", "", byte(len(text))))
    return toks


# -- parser --------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.toks = _tokenize(text)
        self.i = 0
        self.variables = tuple(variables)

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self, text=None) -> _Tok:
        t = self.tok
        if text is not None and t.text != text:
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise ExpressionSyntaxError(f"expected {text!r}, found {found}", t.offset)
        self.i += 1
        return t

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExpressionSyntaxError(f"unexpected {self.tok.text!r}", self.tok.offset)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.take()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.take()
            value = float(t.text)
            if not np.isfinite(value):
                raise ExpressionSyntaxError(f"number {t.text!r} out of range", t.offset)
            return Num(value)
        if t.kind == "name":
            self.take()
            if t.text in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Call(t.text, arg)
            if t.text in CONSTANTS:
                return Const(t.text)
            if t.text in self.variables:
                return Var(t.text)
            raise UnknownIdentifierError(f"unknown identifier {t.text!r}", t.offset)
        if t.kind == "op" and t.text == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExpressionSyntaxError(f"expected a number, name or '(', found {found}", t.offset)


def _free(node: Node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, (Neg,)):
        return _free(node.operand)
    if isinstance(node, Call):
        return _free(node.arg)
    if isinstance(node, BinOp):
        return _free(node.left) | _free(node.right)
    return set()


@dataclass(frozen=True)
class Expression:
    """A parsed expression, callable with one positional argument per variable."""

    tree: Node
    variables: tuple = ("x",)
    source: str = ""

    def __call__(self, *args):
        if len(args) != len(self.variables):
            raise TypeError(f"expected {len(self.variables)} arguments {self.variables}, got {len(args)}")
        env = dict(zip(self.variables, args))
        out = self.tree.eval(env)
        shape = np.broadcast(*[np.asarray(a) for a in args]).shape if args else ()
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)

    @property
    def free_variables(self) -> frozenset:
        return frozenset(_free(self.tree))

    @property
    def is_constant(self) -> bool:
        return not self.free_variables

    def value(self) -> float:
        """Numeric value of a constant expression."""
        if not self.is_constant:
            raise ValueError(f"expression {self} depends on {sorted(self.free_variables)}")
        return float(self.tree.eval({}))

    def __str__(self):
        return str(self.tree)


def parse_expression(text: str, variables: Sequence[str] = ("x", "y")) -> Expression:
    """Parse ``text`` over the given variable names.

    Raises
    ------
    ExpressionSyntaxError
        Malformed input; ``offset`` is the UTF-8 byte position.
    UnknownIdentifierError
        A name that is neither a variable, ``pi`` nor a known function.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    tree = _Parser(text, variables).parse()
    return Expression(tree, tuple(variables), text)
