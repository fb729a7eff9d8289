"""Coefficient-expression mini-language.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := number | 'x' digits | 'abs' '(' expr ')' | '(' expr ')'
            | factor '^' integer | '-' factor

Variables are 1-based (``x1`` is the first coordinate).  Parsed trees
evaluate on ``(M, n)`` point arrays and differentiate symbolically; ``abs``
differentiates to ``sign`` of its argument, which is one-sided on the kink.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .fields import ScalarField


class ExpressionError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class Node:
    prec = 100

    def eval(self, X):
        raise NotImplementedError

    def diff(self, j: int) -> "Node":
        raise NotImplementedError

    def kinks(self, X):
        return np.zeros(X.shape[0], dtype=bool)

    def max_var(self) -> int:
        return 0

    def _wrap(self, child: "Node", prec: int) -> str:
        s = str(child)
        return f"({s})" if child.prec < prec else s


@dataclass(frozen=True)
class Num(Node):
    v: float

    def eval(self, X):
        return np.full(X.shape[0], self.v)

    def diff(self, j):
        return ZERO

    def __str__(self):
        if self.v < 0:
            return f"({self.v!r})"
        return repr(self.v) if self.v != int(self.v) else str(int(self.v))


ZERO = Num(0.0)
ONE = Num(1.0)


@dataclass(frozen=True)
class Var(Node):
    index: int  # 1-based

    def eval(self, X):
        if self.index > X.shape[1]:
            raise IndexError(f"x{self.index} used with points of dimension {X.shape[1]}")
        return X[:, self.index - 1].astype(float)

    def diff(self, j):
        return ONE if j == self.index else ZERO

    def max_var(self):
        return self.index

    def __str__(self):
        return f"x{self.index}"


@dataclass(frozen=True)
class Add(Node):
    a: Node
    b: Node
    prec = 1

    def eval(self, X):
        return self.a.eval(X) + self.b.eval(X)

    def diff(self, j):
        return add(self.a.diff(j), self.b.diff(j))

    def kinks(self, X):
        return self.a.kinks(X) | self.b.kinks(X)

    def max_var(self):
        return max(self.a.max_var(), self.b.max_var())

    def __str__(self):
        return f"{self._wrap(self.a, 1)}+{self._wrap(self.b, 2)}"


@dataclass(frozen=True)
class Sub(Add):
    def eval(self, X):
        return self.a.eval(X) - self.b.eval(X)

    def diff(self, j):
        return sub(self.a.diff(j), self.b.diff(j))

    def __str__(self):
        return f"{self._wrap(self.a, 1)}-{self._wrap(self.b, 2)}"


@dataclass(frozen=True)
class Mul(Node):
    a: Node
    b: Node
    prec = 2

    def eval(self, X):
        return self.a.eval(X) * self.b.eval(X)

    def diff(self, j):
        return add(mul(self.a.diff(j), self.b), mul(self.a, self.b.diff(j)))

    def kinks(self, X):
        return self.a.kinks(X) | self.b.kinks(X)

    def max_var(self):
        return max(self.a.max_var(), self.b.max_var())

    def __str__(self):
        return f"{self._wrap(self.a, 2)}*{self._wrap(self.b, 3)}"


@dataclass(frozen=True)
class Div(Mul):
    def eval(self, X):
        return self.a.eval(X) / self.b.eval(X)

    def diff(self, j):
        num = sub(mul(self.a.diff(j), self.b), mul(self.a, self.b.diff(j)))
        return div(num, IntPow(self.b, 2))

    def __str__(self):
        return f"{self._wrap(self.a, 2)}/{self._wrap(self.b, 3)}"


@dataclass(frozen=True)
class Neg(Node):
    a: Node
    prec = 3

    def eval(self, X):
        return -self.a.eval(X)

    def diff(self, j):
        d = self.a.diff(j)
        return ZERO if d == ZERO else Neg(d)

    def kinks(self, X):
        return self.a.kinks(X)

    def max_var(self):
        return self.a.max_var()

    def __str__(self):
        return f"-{self._wrap(self.a, 3)}"


@dataclass(frozen=True)
class IntPow(Node):
    a: Node
    k: int
    prec = 4

    def eval(self, X):
        return self.a.eval(X) ** self.k

    def diff(self, j):
        d = self.a.diff(j)
        if d == ZERO or self.k == 0:
            return ZERO
        inner = self.a if self.k == 2 else IntPow(self.a, self.k - 1)
        if self.k == 1:
            return d
        return mul(Num(float(self.k)), mul(inner, d))

    def kinks(self, X):
        return self.a.kinks(X)

    def max_var(self):
        return self.a.max_var()

    def __str__(self):
        return f"{self._wrap(self.a, 5)}^{self.k}"


@dataclass(frozen=True)
class Abs(Node):
    a: Node

    def eval(self, X):
        return np.abs(self.a.eval(X))

    def diff(self, j):
        d = self.a.diff(j)
        return ZERO if d == ZERO else mul(Sign(self.a), d)

    def kinks(self, X):
        return (self.a.eval(X) == 0.0) | self.a.kinks(X)

    def max_var(self):
        return self.a.max_var()

    def __str__(self):
        return f"abs({self.a})"


@dataclass(frozen=True)
class Sign(Node):
    """Derivative of abs; not part of the source grammar."""

    a: Node

    def eval(self, X):
        return np.sign(self.a.eval(X))

    def diff(self, j):
        return ZERO

    def kinks(self, X):
        return (self.a.eval(X) == 0.0) | self.a.kinks(X)

    def max_var(self):
        return self.a.max_var()

    def __str__(self):
        return f"sign({self.a})"


def add(a, b):
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Add(a, b)


def sub(a, b):
    if b == ZERO:
        return a
    if a == ZERO:
        return Neg(b)
    return Sub(a, b)


def mul(a, b):
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Mul(a, b)


def div(a, b):
    if a == ZERO:
        return ZERO
    return Div(a, b)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<var>x\d+)|(?P<abs>abs)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str):
    pos = 0
    tokens = []
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            start = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            word = re.match(r"[A-Za-z_]\w*", src[start:])
            if word:
                raise ExpressionError(f"unknown identifier {word.group(0)!r}", start)
            raise ExpressionError(f"unexpected character {src[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            raise ExpressionError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected token {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self):
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.factor())
        node = self.primary()
        while self.peek()[1] == "^":
            self.take()
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                raise ExpressionError("exponent must be a non-negative integer", pos)
            node = IntPow(node, int(text))
        return node

    def primary(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "var":
            idx = int(text[1:])
            if idx < 1:
                raise ExpressionError("variables are numbered from x1", pos)
            return Var(idx)
        if kind == "abs":
            self.expect("(")
            node = self.expr()
            self.expect(")")
            return Abs(node)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected {text or 'end of input'!r}", pos)


class ExpressionField(ScalarField):
    """A parsed expression with symbolic first and second derivatives."""

    def __init__(self, tree: Node, source: str):
        self.tree = tree
        self.source = source
        self._grad_trees: dict[int, list] = {}
        super().__init__(
            tree.eval,
            self._eval_grad,
            self._eval_hess,
            kinks=tree.kinks,
            name=source,
        )

    def _derivs(self, n: int):
        if n not in self._grad_trees:
            g = [self.tree.diff(j + 1) for j in range(n)]
            h = [[gi.diff(j + 1) for j in range(n)] for gi in g]
            self._grad_trees[n] = [g, h]
        return self._grad_trees[n]

    def _eval_grad(self, X):
        g, _ = self._derivs(X.shape[1])
        return np.stack([gi.eval(X) for gi in g], axis=1)

    def _eval_hess(self, X):
        _, h = self._derivs(X.shape[1])
        n = X.shape[1]
        out = np.empty((X.shape[0], n, n))
        for i in range(n):
            for j in range(n):
                out[:, i, j] = h[i][j].eval(X)
        return out

    def pretty(self) -> str:
        return str(self.tree)

    def derivative(self, j: int) -> Node:
        """Symbolic partial derivative tree with respect to x_j (1-based)."""
        return self.tree.diff(j)


def parse_expression(src: str) -> ExpressionField:
    if not src or not src.strip():
        raise ExpressionError("empty expression", 0)
    return ExpressionField(_Parser(src).parse(), src)
