"""Scalar-field expressions with exact value, gradient and Hessian.

Expressions are parsed from a small infix language::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | base ('^' ['-'] number)?
    base   := number | 'x'digits | 'pi' | func '(' expr ')' | '(' expr ')'
    func   := sin | cos | exp | log | tanh

and evaluated with second-order forward-mode automatic differentiation
(truncated Taylor jets carried per variable pair). Evaluation is vectorised
over a batch of points so that the flow integrator can advance many
trajectories at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import ArityError, EvalError, ExprSyntaxError, UnknownVariable

FUNCTIONS = ("sin", "cos", "exp", "log", "tanh")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # zero-based; printed as x{index+1}


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: float


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Pow, Call]


@dataclass(frozen=True)
class Expr:
    """An immutable parsed expression in ``n`` variables."""

    root: Node
    n: int

    def __str__(self):
        return to_source(self)

    def evaluate(self, X, order=1):
        """Batched evaluation; see :func:`evaluate`."""
        return evaluate(self, X, order)

    @cached_property
    def _program(self):
        return _compile(self.root)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str, n: int):
        self.src = source
        self.n = n
        self.pos = 0

    def _skip(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def _peek(self):
        self._skip()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def _fail(self, message, expected):
        self._skip()
        raise ExprSyntaxError(message, self.pos, expected)

    def parse(self) -> Node:
        node = self._expr()
        if self._peek():
            self._fail(f"unexpected {self._peek()!r}", ["+", "-", "*", "/", "^", "end of input"])
        return node

    def _expr(self):
        node = self._term()
        while self._peek() in ("+", "-"):
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self._term())
        return node

    def _term(self):
        node = self._factor()
        while self._peek() in ("*", "/"):
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self._factor())
        return node

    def _factor(self):
        if self._peek() == "-":
            self.pos += 1
            return Neg(self._factor())
        node = self._base()
        if self._peek() == "^":
            self.pos += 1
            sign = 1.0
            if self._peek() == "-":
                self.pos += 1
                sign = -1.0
            self._skip()
            node = Pow(node, sign * self._number())
        return node

    def _number(self):
        start = self.pos
        s = self.src
        i = start
        while i < len(s) and s[i].isdigit():
            i += 1
        if i < len(s) and s[i] == ".":
            i += 1
            while i < len(s) and s[i].isdigit():
                i += 1
        mantissa = s[start:i]
        if mantissa in ("", "."):
            self._fail("expected a number", ["number"])
        if i < len(s) and s[i] in "eE":
            j = i + 1
            if j < len(s) and s[j] in "+-":
                j += 1
            k = j
            while k < len(s) and s[k].isdigit():
                k += 1
            if k == j:
                self.pos = j
                raise ExprSyntaxError("malformed exponent", j, ["digit"])
            i = k
        self.pos = i
        return float(s[start:i])

    def _base(self):
        c = self._peek()
        expected = ["number", "variable", "function", "("]
        if not c:
            self._fail("unexpected end of input", expected)
        if c.isdigit() or c == ".":
            return Num(self._number())
        if c == "(":
            self.pos += 1
            node = self._expr()
            if self._peek() != ")":
                self._fail("unbalanced parenthesis", [")"])
            self.pos += 1
            return node
        if c.isalpha():
            start = self.pos
            i = start
            while i < len(self.src) and self.src[i].isalnum():
                i += 1
            word = self.src[start:i]
            self.pos = i
            if word[0] == "x" and word[1:].isdigit():
                index = int(word[1:])
                if not 1 <= index <= self.n:
                    raise UnknownVariable(word, start)
                return Var(index - 1)
            if word == "pi":
                return Num(math.pi)
            if word in FUNCTIONS:
                if self._peek() != "(":
                    self._fail(f"expected '(' after {word}", ["("])
                self.pos += 1
                if self._peek() == ")":
                    raise ArityError(f"{word}() takes exactly one argument, got none")
                arg = self._expr()
                if self._peek() == ",":
                    raise ArityError(f"{word}() takes exactly one argument")
                if self._peek() != ")":
                    self._fail("unbalanced parenthesis", [")"])
                self.pos += 1
                return Call(word, arg)
            if word[0] == "x":
                raise UnknownVariable(word, start)
            self.pos = start
            self._fail(f"unknown identifier {word!r}", expected)
        self._fail(f"unexpected {c!r}", expected)


def parse_expr(source: str, n: int) -> Expr:
    """Parse ``source`` as an expression in variables ``x1..xn``."""
    if n < 1:
        raise ValueError("dimension must be positive")
    return Expr(_Parser(source, n).parse(), n)


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_number(v: float) -> str:
    return "pi" if v == math.pi else repr(float(v))


def _show(node: Node, ctx: int) -> str:
    # ctx: minimum precedence the surrounding position accepts without parentheses
    if isinstance(node, Num):
        if node.value < 0:
            text = "-" + _fmt_number(-node.value)
            return f"({text})" if ctx > 0 else text
        return _fmt_number(node.value)
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Call):
        return f"{node.func}({_show(node.arg, 0)})"
    if isinstance(node, Pow):
        text = f"{_show(node.base, 5)}^{node.exponent!r}"
        return f"({text})" if ctx > 4 else text
    if isinstance(node, Neg):
        text = "-" + _show(node.operand, 3)
        return f"({text})" if ctx > 3 else text
    prec = _PREC[node.op]
    text = f"{_show(node.left, prec)} {node.op} {_show(node.right, prec + 1)}"
    return f"({text})" if ctx > prec else text


def to_source(expr: Expr) -> str:
    """Render an expression back to parseable source text."""
    return _show(expr.root, 0)


# ---------------------------------------------------------------------------
# Forward-mode jets
# ---------------------------------------------------------------------------

class _Jet:
    """Truncated second-order Taylor data for a batch of points.

    ``val`` has shape (B,), ``grad`` (n, B), ``hess`` (n, n, B) or None when
    only first derivatives are requested.
    """

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess


def _outer(a, b):
    return a[:, None, :] * b[None, :, :]


def _chain(u: _Jet, f0, f1, f2) -> _Jet:
    grad = f1 * u.grad
    hess = None
    if u.hess is not None:
        hess = f1 * u.hess + f2 * _outer(u.grad, u.grad)
    return _Jet(f0, grad, hess)


def _scale(u: _Jet, c: float) -> _Jet:
    return _Jet(c * u.val, c * u.grad, None if u.hess is None else c * u.hess)


def _shift(u: _Jet, c: float) -> _Jet:
    return _Jet(u.val + c, u.grad, u.hess)


def _add(a: _Jet, b: _Jet, sign: float) -> _Jet:
    hess = None if a.hess is None else a.hess + sign * b.hess
    return _Jet(a.val + sign * b.val, a.grad + sign * b.grad, hess)


def _mul(a: _Jet, b: _Jet) -> _Jet:
    grad = a.val * b.grad + b.val * a.grad
    hess = None
    if a.hess is not None:
        hess = a.val * b.hess + b.val * a.hess + _outer(a.grad, b.grad) + _outer(b.grad, a.grad)
    return _Jet(a.val * b.val, grad, hess)


def _reciprocal(u: _Jet) -> _Jet:
    if np.any(u.val == 0.0):
        raise EvalError("division by zero")
    inv = 1.0 / u.val
    return _chain(u, inv, -inv * inv, 2.0 * inv * inv * inv)


def _power_scalar(base, p: float):
    if float(p).is_integer():
        return base ** int(p)
    return base ** p


def _pow(u: _Jet, p: float) -> _Jet:
    if p == 0.0:
        return _Jet(np.ones_like(u.val), np.zeros_like(u.grad),
                    None if u.hess is None else np.zeros_like(u.hess))
    if p == 1.0:
        return u
    b = u.val
    if float(p).is_integer():
        if p < 0 and np.any(b == 0.0):
            raise EvalError("zero raised to a negative power")
    elif np.any(b <= 0.0):
        raise EvalError(f"non-positive base raised to non-integer power {p}")
    f0 = _power_scalar(b, p)
    f1 = p * _power_scalar(b, p - 1.0)
    f2 = p * (p - 1.0) * _power_scalar(b, p - 2.0)
    return _chain(u, f0, f1, f2)


def _apply(func: str, u: _Jet) -> _Jet:
    v = u.val
    if func == "sin":
        s, c = np.sin(v), np.cos(v)
        return _chain(u, s, c, -s)
    if func == "cos":
        s, c = np.sin(v), np.cos(v)
        return _chain(u, c, -s, -c)
    if func == "exp":
        e = np.exp(v)
        return _chain(u, e, e, e)
    if func == "log":
        if np.any(v <= 0.0):
            raise EvalError("log of a non-positive value")
        inv = 1.0 / v
        return _chain(u, np.log(v), inv, -inv * inv)
    if func == "tanh":
        t = np.tanh(v)
        d = 1.0 - t * t
        return _chain(u, t, d, -2.0 * t * d)
    raise ValueError(func)  # parser never produces this


def _const(node: Node):
    """Fold a constant subtree to a float, or return None."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return None
    if isinstance(node, Neg):
        c = _const(node.operand)
        return None if c is None else -c
    if isinstance(node, Pow):
        c = _const(node.base)
        return None if c is None else c ** node.exponent
    if isinstance(node, Call):
        c = _const(node.arg)
        if c is None:
            return None
        if node.func == "log" and c <= 0:
            raise EvalError("log of a non-positive constant")
        return float(getattr(np, node.func)(c))
    a, b = _const(node.left), _const(node.right)
    if a is None or b is None:
        return None
    if node.op == "/" and b == 0.0:
        raise EvalError("division by zero")
    return {"+": a + b, "-": a - b, "*": a * b, "/": a / b if b else 0.0}[node.op]


class _Context:
    def __init__(self, X: np.ndarray, order: int):
        self.X = X
        self.order = order
        self.B, self.n = X.shape

    def var(self, i: int) -> _Jet:
        grad = np.zeros((self.n, self.B))
        grad[i] = 1.0
        hess = np.zeros((self.n, self.n, self.B)) if self.order >= 2 else None
        return _Jet(self.X[:, i].copy(), grad, hess)

    def lift(self, c: float) -> _Jet:
        hess = np.zeros((self.n, self.n, self.B)) if self.order >= 2 else None
        return _Jet(np.full(self.B, c), np.zeros((self.n, self.B)), hess)


def _compile(node: Node):
    """Turn a subtree into ``ctx -> float | _Jet``; constants are folded once."""
    c = _const(node)
    if c is not None:
        return lambda ctx: c
    if isinstance(node, Var):
        i = node.index
        return lambda ctx: ctx.var(i)
    if isinstance(node, Neg):
        inner = _compile(node.operand)
        return lambda ctx: _scale(inner(ctx), -1.0)
    if isinstance(node, Call):
        inner, func = _compile(node.arg), node.func
        return lambda ctx: _apply(func, inner(ctx))
    if isinstance(node, Pow):
        inner, p = _compile(node.base), node.exponent
        return lambda ctx: _pow(inner(ctx), p)
    left, right = _compile(node.left), _compile(node.right)
    ca, cb = _const(node.left), _const(node.right)
    op = node.op
    if op in "+-":
        sign = 1.0 if op == "+" else -1.0
        if ca is not None:
            return lambda ctx: _shift(_scale(right(ctx), sign), ca)
        if cb is not None:
            return lambda ctx: _shift(left(ctx), sign * cb)
        return lambda ctx: _add(left(ctx), right(ctx), sign)
    if op == "*":
        if ca is not None:
            return lambda ctx: _scale(right(ctx), ca)
        if cb is not None:
            return lambda ctx: _scale(left(ctx), cb)
        return lambda ctx: _mul(left(ctx), right(ctx))
    if cb is not None:
        if cb == 0.0:
            raise EvalError("division by zero")
        return lambda ctx: _scale(left(ctx), 1.0 / cb)
    if ca is not None:
        return lambda ctx: _scale(_reciprocal(right(ctx)), ca)
    return lambda ctx: _mul(left(ctx), _reciprocal(right(ctx)))


def evaluate(expr: Expr, X, order: int = 1):
    """Evaluate ``expr`` on a batch of points.

    ``X`` has shape (B, n) (a single point of shape (n,) is promoted).
    Returns ``(values, gradients, hessians)`` with shapes (B,), (B, n) and
    (B, n, n); the Hessian entry is None for ``order < 2``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != expr.n:
        raise ValueError(f"expected points of dimension {expr.n}, got {X.shape[1]}")
    ctx = _Context(X, order)
    with np.errstate(over="ignore", invalid="ignore"):
        out = expr._program(ctx)
    if not isinstance(out, _Jet):
        out = ctx.lift(float(out))
    if not np.all(np.isfinite(out.val)) or not np.all(np.isfinite(out.grad)):
        raise EvalError("expression evaluated to a non-finite value")
    grad = out.grad.T.copy()
    hess = None
    if out.hess is not None:
        hess = np.moveaxis(out.hess, 2, 0)
        # symmetrise from the upper triangle so the result is exactly symmetric
        iu = np.triu_indices(expr.n, 1)
        hess[:, iu[1], iu[0]] = hess[:, iu[0], iu[1]]
    return out.val, grad, hess


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and packed upper-triangular Hessian at one point."""

    value: float
    gradient: np.ndarray
    hess_upper: np.ndarray  # row-major upper triangle, length n(n+1)/2

    @property
    def n(self) -> int:
        return len(self.gradient)

    @property
    def hessian(self) -> np.ndarray:
        n = self.n
        H = np.empty((n, n))
        iu = np.triu_indices(n)
        H[iu] = self.hess_upper
        H[iu[1], iu[0]] = self.hess_upper
        return H


def eval_jet2(f: Expr, x) -> Jet2:
    """Exact value, differential and coordinate Hessian of ``f`` at ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != f.n:
        raise ValueError(f"point has length {x.shape[0]}, expression has n={f.n}")
    val, grad, hess = evaluate(f, x[None, :], order=2)
    iu = np.triu_indices(f.n)
    return Jet2(float(val[0]), grad[0], hess[0][iu].copy())


# ---------------------------------------------------------------------------
# Substitution helpers
# ---------------------------------------------------------------------------

def linear_substitute(expr: Expr, A, offset=None) -> Expr:
    """Return ``y -> expr(A @ y + offset)`` as a new expression in ``y``."""
    A = np.asarray(A, dtype=float)
    m = A.shape[1]
    offset = np.zeros(A.shape[0]) if offset is None else np.asarray(offset, dtype=float)

    def combo(i):
        node = None
        for j in range(m):
            if A[i, j] == 0.0:
                continue
            term = BinOp("*", Num(float(A[i, j])), Var(j))
            node = term if node is None else BinOp("+", node, term)
        if offset[i] != 0.0 or node is None:
            c = Num(float(offset[i]))
            node = c if node is None else BinOp("+", node, c)
        return node

    images = [combo(i) for i in range(A.shape[0])]

    def walk(node):
        if isinstance(node, Var):
            return images[node.index]
        if isinstance(node, Num):
            return node
        if isinstance(node, Neg):
            return Neg(walk(node.operand))
        if isinstance(node, Pow):
            return Pow(walk(node.base), node.exponent)
        if isinstance(node, Call):
            return Call(node.func, walk(node.arg))
        return BinOp(node.op, walk(node.left), walk(node.right))

    return Expr(walk(expr.root), m)


def constant_value(expr: Expr):
    """The value of an expression without variables, else None."""
    return _const(expr.root)
