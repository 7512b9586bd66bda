"""Minimal arithmetic expressions with exact differentiation.

Grammar (Python precedence, ``^`` is exponentiation)::

    expr     := term (("+" | "-") term)*
    term     := factor (("*" | "/") factor)*
    factor   := ("+" | "-") factor | power
    power    := atom ("^" | "**") factor
    atom     := number | variable | constant | func "(" expr ")" | "(" expr ")"
    variable := theta<k> | t<k> | θ<k>          (k = 1..N)
    func     := exp | log | sqrt | sin | cos | tanh

Constants are ``pi``, ``e`` and any names bound by the caller. Parsing uses
the standard library ``ast`` module with a strict node whitelist.
"""

from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

_VAR = re.compile(r"^(?:theta|t|θ)(\d+)$")
_BUILTIN_CONSTANTS = {"pi": math.pi, "e": math.e}
_FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos,
          "tanh": np.tanh}


class ExprError(ValueError):
    """Malformed expression or unknown symbol."""


class Node:
    def eval(self, theta):
        raise NotImplementedError

    def diff(self, k: int) -> "Node":
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Node):
    value: float

    def eval(self, theta):
        return self.value

    def diff(self, k):
        return ZERO

    def __str__(self):
        return repr(self.value)


ZERO = Num(0.0)
ONE = Num(1.0)


@dataclass(frozen=True)
class Var(Node):
    index: int  # 0-based

    def eval(self, theta):
        return theta[self.index]

    def diff(self, k):
        return ONE if k == self.index else ZERO

    def __str__(self):
        return f"theta{self.index + 1}"


def _num(n):
    return isinstance(n, Num)


def add(a, b):
    if _num(a) and _num(b):
        return Num(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Bin("+", a, b)


def sub(a, b):
    if _num(a) and _num(b):
        return Num(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return Bin("-", a, b)


def mul(a, b):
    if _num(a) and _num(b):
        return Num(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Bin("*", a, b)


def div(a, b):
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return Bin("/", a, b)


def neg(a):
    if _num(a):
        return Num(-a.value)
    return Neg(a)


def power(a, b):
    if b == ZERO:
        return ONE
    if b == ONE:
        return a
    return Pow(a, b)


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def eval(self, theta):
        return -self.arg.eval(theta)

    def diff(self, k):
        return neg(self.arg.diff(k))

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class Bin(Node):
    op: str
    left: Node
    right: Node

    def eval(self, theta):
        a = self.left.eval(theta)
        b = self.right.eval(theta)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return a / b

    def diff(self, k):
        a, b = self.left, self.right
        da, db = a.diff(k), b.diff(k)
        if self.op == "+":
            return add(da, db)
        if self.op == "-":
            return sub(da, db)
        if self.op == "*":
            return add(mul(da, b), mul(a, db))
        return div(sub(mul(da, b), mul(a, db)), power(b, Num(2.0)))

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exp: Node

    def eval(self, theta):
        return self.base.eval(theta) ** self.exp.eval(theta)

    def diff(self, k):
        db = self.base.diff(k)
        de = self.exp.diff(k)
        if de == ZERO:
            if not _num(self.exp):
                return mul(mul(self.exp, power(self.base, sub(self.exp, ONE))), db)
            return mul(mul(self.exp, power(self.base, Num(self.exp.value - 1.0))), db)
        # d(b^e) = b^e (e' log b + e b'/b)
        return mul(self, add(mul(de, Call("log", self.base)), div(mul(self.exp, db), self.base)))

    def __str__(self):
        return f"({self.base} ^ {self.exp})"


@dataclass(frozen=True)
class Call(Node):
    name: str
    arg: Node

    def eval(self, theta):
        return _FUNCS[self.name](self.arg.eval(theta))

    def diff(self, k):
        u, du = self.arg, self.arg.diff(k)
        if du == ZERO:
            return ZERO
        outer = {
            "exp": lambda: self,
            "log": lambda: div(ONE, u),
            "sqrt": lambda: div(Num(0.5), self),
            "sin": lambda: Call("cos", u),
            "cos": lambda: neg(Call("sin", u)),
            "tanh": lambda: sub(ONE, power(self, Num(2.0))),
        }[self.name]()
        return mul(outer, du)

    def __str__(self):
        return f"{self.name}({self.arg})"


_BINOPS = {ast.Add: add, ast.Sub: sub, ast.Mult: mul, ast.Div: div, ast.Pow: power}


def _convert(node, constants, nvars):
    if isinstance(node, ast.Expression):
        return _convert(node.body, constants, nvars)
    if isinstance(node, ast.Constant) and type(node.value) in (int, float):
        return Num(float(node.value))
    if isinstance(node, ast.Name):
        m = _VAR.match(node.id)
        if m:
            k = int(m.group(1))
            if k < 1 or (nvars is not None and k > nvars):
                raise ExprError(f"variable {node.id!r} outside 1..{nvars}")
            return Var(k - 1)
        if node.id in constants:
            return Num(float(constants[node.id]))
        raise ExprError(f"unknown symbol {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        arg = _convert(node.operand, constants, nvars)
        return arg if isinstance(node.op, ast.UAdd) else neg(arg)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_convert(node.left, constants, nvars),
                                      _convert(node.right, constants, nvars))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
            and len(node.args) == 1 and not node.keywords:
        return Call(node.func.id, _convert(node.args[0], constants, nvars))
    raise ExprError(f"unsupported syntax: {ast.dump(node)[:60]}")


@dataclass(frozen=True)
class Expression:
    """A parsed expression in theta1..thetaN with cached derivatives."""

    source: str
    tree: Node

    def __call__(self, theta):
        return float(self.tree.eval(np.asarray(theta, dtype=float)))

    def derivative(self, k: int) -> "Expression":
        """Exact partial derivative with respect to theta(k+1), k 0-based."""
        return Expression(f"d({self.source})/dtheta{k + 1}", self.tree.diff(k))

    def __str__(self):
        return str(self.tree)


def parse(source: str, constants: Optional[Mapping[str, float]] = None,
          nvars: Optional[int] = None) -> Expression:
    """Parse ``source``; ``^`` denotes exponentiation."""
    consts = dict(_BUILTIN_CONSTANTS)
    consts.update(constants or {})
    text = source.replace("^", "**").replace("×", "*").replace("÷", "/").replace("−", "-")
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExprError(f"cannot parse {source!r}: {exc.msg}") from None
    return Expression(source, _convert(tree, consts, nvars))
