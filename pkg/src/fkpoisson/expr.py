"""Scalar coefficient expressions.

Drift, diffusion, potential and source terms are written as text such as
``"-x"``, ``"sqrt(2)"`` or ``"0.2*step(abs(x)-1)"`` and parsed against a
fixed dimension ``d``.  Variables are ``x1 .. xd`` (plain ``x`` is accepted
when ``d == 1``).

Grammar, loosest binding first::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | NAME | NAME '(' args ')' | '(' expr ')'

so ``-x^2`` is ``-(x^2)`` and ``2^-x`` is ``2^(-x)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "VariableRangeError",
    "EvaluationError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expression",
    "FUNCTIONS",
    "parse",
    "evaluate",
    "evaluate_many",
    "pretty",
    "is_constant",
    "constant_value",
]


class ExprError(ValueError):
    """Base class for every expression failure."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    pass


class VariableRangeError(ExprSyntaxError):
    pass


class EvaluationError(ExprError):
    pass


# name -> arity
FUNCTIONS = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "log": 1,
    "tanh": 1,
    "abs": 1,
    "sign": 1,
    "sqrt": 1,
    "step": 1,
    "min": 2,
    "max": 2,
}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Expression:
    """A parsed expression bound to a dimension."""

    root: Node
    dimension: int
    source: str = ""

    def __call__(self, point) -> float:
        return evaluate(self, point)

    def __str__(self) -> str:
        return pretty(self)

    def variables(self) -> set:
        out = set()
        _collect_vars(self.root, out)
        return out


def _collect_vars(node, out):
    if isinstance(node, Var):
        out.add(node.index)
    elif isinstance(node, Neg):
        _collect_vars(node.operand, out)
    elif isinstance(node, BinOp):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, Call):
        for a in node.args:
            _collect_vars(a, out)


# ---------------------------------------------------------------- tokenizer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, dimension: int):
        self.source = source
        self.dimension = dimension
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None, cls=ExprSyntaxError):
        tok = tok or self.peek()
        raise cls(message, _byte_offset(self.source, tok[2]))

    def expect(self, text):
        tok = self.peek()
        if tok[1] != text or tok[0] == "end":
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            self.fail(f"expected {text!r}, found {what}")
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.fail(f"unexpected token {tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        tok = self.advance()
        kind, text, _ = tok
        if kind == "num":
            value = float(text)
            if not math.isfinite(value):
                self.fail("numeric literal out of range", tok)
            return Num(value)
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(tok)
            return self.variable(tok)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.fail("unexpected end of input", tok)
        self.fail(f"unexpected token {text!r}", tok)

    def call(self, tok):
        name = tok[1]
        if name not in FUNCTIONS:
            self.fail(f"unknown function {name!r}", tok, UnknownIdentifierError)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == "," and self.peek()[0] == "op":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        if len(args) != FUNCTIONS[name]:
            self.fail(f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}", tok)
        return Call(name, tuple(args))

    def variable(self, tok):
        name = tok[1]
        if name == "x":
            if self.dimension != 1:
                self.fail("bare 'x' is only allowed in dimension 1", tok, UnknownIdentifierError)
            return Var(1)
        m = re.fullmatch(r"x(\d+)", name)
        if m is None:
            self.fail(f"unknown identifier {name!r}", tok, UnknownIdentifierError)
        index = int(m.group(1))
        if not 1 <= index <= self.dimension:
            self.fail(f"variable {name} out of range for dimension {self.dimension}", tok, VariableRangeError)
        return Var(index)


def parse(source: str, dimension: int = 1) -> Expression:
    """Parse ``source`` into an :class:`Expression` over ``dimension`` variables."""
    if not isinstance(source, str):
        source = repr(float(source))
    if dimension < 1:
        raise ValueError("dimension must be positive")
    if not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return Expression(_Parser(source, dimension).parse(), dimension, source)


# ----------------------------------------------------------- pretty printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 5


def _fmt(node, dimension) -> str:
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "x" if dimension == 1 else f"x{node.index}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_fmt(a, dimension) for a in node.args)})"
    if isinstance(node, Neg):
        inner = _fmt(node.operand, dimension)
        if _prec(node.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[node.op]
    left = _fmt(node.left, dimension)
    right = _fmt(node.right, dimension)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    return f"{left} {node.op} {right}"


def pretty(expr: Expression) -> str:
    return _fmt(expr.root, expr.dimension)


# --------------------------------------------------------------- evaluation


def _pow_scalar(base, exponent):
    if base < 0 and not float(exponent).is_integer():
        raise EvaluationError(f"negative base {base} with non-integer exponent {exponent}")
    if base == 0 and exponent < 0:
        raise EvaluationError("division by zero (0 raised to a negative power)")
    try:
        return math.pow(base, exponent)
    except OverflowError:
        return math.copysign(math.inf, base) if float(exponent).is_integer() and exponent % 2 else math.inf


def _sign(v):
    return (v > 0) - (v < 0)


def _eval(node, x):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index - 1])
    if isinstance(node, Neg):
        return -_eval(node.operand, x)
    if isinstance(node, BinOp):
        a = _eval(node.left, x)
        b = _eval(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if b == 0:
                raise EvaluationError("division by zero")
            return a / b
        return _pow_scalar(a, b)
    args = [_eval(a, x) for a in node.args]
    name = node.name
    v = args[0]
    if name == "log":
        if v <= 0:
            raise EvaluationError(f"log of non-positive value {v}")
        return math.log(v)
    if name == "sqrt":
        if v < 0:
            raise EvaluationError(f"sqrt of negative value {v}")
        return math.sqrt(v)
    if name == "exp":
        try:
            return math.exp(v)
        except OverflowError:
            return math.inf
    if name == "sin":
        return math.sin(v)
    if name == "cos":
        return math.cos(v)
    if name == "tanh":
        return math.tanh(v)
    if name == "abs":
        return abs(v)
    if name == "sign":
        return float(_sign(v))
    if name == "step":
        return 0.5 * (_sign(v) + 1.0)
    if name == "min":
        return min(v, args[1])
    return max(v, args[1])


def evaluate(expr: Expression, point) -> float:
    """Evaluate at one point (sequence of length ``d``, or a scalar when d=1)."""
    x = np.atleast_1d(np.asarray(point, dtype=float))
    if x.shape != (expr.dimension,):
        raise ValueError(f"point has shape {x.shape}, expected ({expr.dimension},)")
    return float(_eval(expr.root, x))


def _eval_vec(node, cols, n):
    if isinstance(node, Num):
        return np.full(n, node.value)
    if isinstance(node, Var):
        return cols[node.index - 1]
    if isinstance(node, Neg):
        return -_eval_vec(node.operand, cols, n)
    if isinstance(node, BinOp):
        a = _eval_vec(node.left, cols, n)
        b = _eval_vec(node.right, cols, n)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(b == 0):
                raise EvaluationError("division by zero")
            return a / b
        if np.any((a < 0) & (b != np.floor(b))):
            raise EvaluationError("negative base with non-integer exponent")
        if np.any((a == 0) & (b < 0)):
            raise EvaluationError("division by zero (0 raised to a negative power)")
        with np.errstate(over="ignore"):
            return np.power(a, b)
    args = [_eval_vec(a, cols, n) for a in node.args]
    v = args[0]
    name = node.name
    if name == "log":
        if np.any(v <= 0):
            raise EvaluationError("log of non-positive value")
        return np.log(v)
    if name == "sqrt":
        if np.any(v < 0):
            raise EvaluationError("sqrt of negative value")
        return np.sqrt(v)
    if name == "exp":
        with np.errstate(over="ignore"):
            return np.exp(v)
    if name == "step":
        return 0.5 * (np.sign(v) + 1.0)
    if name == "min":
        return np.minimum(v, args[1])
    if name == "max":
        return np.maximum(v, args[1])
    return {"sin": np.sin, "cos": np.cos, "tanh": np.tanh, "abs": np.abs, "sign": np.sign}[name](v)


def evaluate_many(expr: Expression, points) -> np.ndarray:
    """Vectorised evaluation over an ``(n, d)`` array of points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 and expr.dimension == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != expr.dimension:
        raise ValueError(f"points have shape {pts.shape}, expected (n, {expr.dimension})")
    n = pts.shape[0]
    cols = [pts[:, i] for i in range(expr.dimension)]
    return np.asarray(_eval_vec(expr.root, cols, n), dtype=float)


def is_constant(expr: Expression) -> bool:
    return not expr.variables()


def constant_value(expr: Expression) -> float:
    if not is_constant(expr):
        raise ValueError(f"{pretty(expr)} is not constant")
    return evaluate(expr, np.zeros(expr.dimension))


# ----------------------------------------------------------- code generation

_KERNEL_FUNCS = {
    "sin": "math.sin",
    "cos": "math.cos",
    "exp": "math.exp",
    "tanh": "math.tanh",
    "abs": "abs",
    "log": "_log",
    "sqrt": "_sqrt",
    "sign": "_sign",
    "step": "_step",
    "min": "min",
    "max": "max",
}


def to_source(expr: Expression, names=None) -> str:
    """Python source for the kernel compiler; helpers ``_log`` etc. must be in scope."""
    names = names or [f"x{i + 1}" for i in range(expr.dimension)]
    return _src(expr.root, names)


def _src(node, names) -> str:
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return names[node.index - 1]
    if isinstance(node, Neg):
        return f"(-{_src(node.operand, names)})"
    if isinstance(node, BinOp):
        a = _src(node.left, names)
        b = _src(node.right, names)
        if node.op == "/":
            return f"_div({a}, {b})"
        if node.op == "^":
            return f"_pow({a}, {b})"
        return f"({a} {node.op} {b})"
    args = ", ".join(_src(a, names) for a in node.args)
    return f"{_KERNEL_FUNCS[node.name]}({args})"
