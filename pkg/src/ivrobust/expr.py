"""Scalar expressions over decision variables ``x1..xN`` and parameters ``v1..vK``.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | power
    power  := atom ('^' INTEGER)?
    atom   := NUMBER | 'x'INDEX | 'v'INDEX
            | ('max' | 'min') '(' expr (',' expr)+ ')'
            | 'abs' '(' expr ')'
            | '(' expr ')'

Nonsmoothness is limited to max, min and abs over smooth subtrees, which keeps
the subdifferential estimates below computable.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .setcalc import Polytope

TOL_ACTIVE = 1e-9


class ParseError(ValueError):
    def __init__(self, msg: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{msg} at position {pos}" + (f" in {text!r}" if text else ""))


# --- nodes -----------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based


@dataclass(frozen=True)
class Param:
    index: int  # 0-based


@dataclass(frozen=True)
class Sum:
    children: tuple


@dataclass(frozen=True)
class Product:
    children: tuple


@dataclass(frozen=True)
class Power:
    child: "Expr"
    exponent: int

    def __post_init__(self):
        if int(self.exponent) != self.exponent or self.exponent < 1:
            raise ValueError(f"power exponent must be a positive integer, got {self.exponent}")


@dataclass(frozen=True)
class Negate:
    child: "Expr"


@dataclass(frozen=True)
class Max:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("max needs at least two arguments")


@dataclass(frozen=True)
class Min:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("min needs at least two arguments")


@dataclass(frozen=True)
class Abs:
    child: "Expr"


Expr = Union[Const, Var, Param, Sum, Product, Power, Negate, Max, Min, Abs]


def negate(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(-e.value)
    return Negate(e)


# --- parsing ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = len(text[pos:]) - len(text[pos:].lstrip()) + pos
            raise ParseError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n_vars: int, n_params: int):
        self.text = text
        self.n_vars = n_vars
        self.n_params = n_params
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)

    def fail(self, msg):
        raise ParseError(msg, self.peek()[2], self.text)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos, self.text)
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            t = self.term()
            terms.append(t if op == "+" else negate(t))
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> Expr:
        factors = [self.unary()]
        while self.peek()[1] == "*":
            self.take()
            factors.append(self.unary())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return negate(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit() or int(val) < 1:
                raise ParseError("exponent must be a positive integer", pos, self.text)
            return Power(base, int(val))
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            low = val.lower()
            if low in ("max", "min"):
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) < 2:
                    raise ParseError(f"{low} needs at least two arguments", pos, self.text)
                return Max(tuple(args)) if low == "max" else Min(tuple(args))
            if low == "abs":
                self.expect("(")
                e = self.expr()
                self.expect(")")
                return Abs(e)
            m = re.fullmatch(r"([xv])(\d+)", val)
            if m:
                idx = int(m.group(2))
                limit = self.n_vars if m.group(1) == "x" else self.n_params
                if idx < 1 or idx > limit:
                    what = "variable" if m.group(1) == "x" else "parameter"
                    raise ParseError(f"undeclared {what} {val!r} (declared: {limit})", pos, self.text)
                return Var(idx - 1) if m.group(1) == "x" else Param(idx - 1)
            raise ParseError(f"unknown name {val!r}", pos, self.text)
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {found}", pos, self.text)


def parse(text: str, n_vars: int, n_params: int = 0) -> Expr:
    return _Parser(text, n_vars, n_params).parse()


# --- printing --------------------------------------------------------------

def _atomic(e: Expr) -> bool:
    if isinstance(e, Const):
        return e.value >= 0 and not (e.value == 0 and np.signbit(e.value))
    return isinstance(e, (Var, Param, Max, Min, Abs))


def _wrap(e: Expr) -> str:
    s = to_text(e)
    return s if _atomic(e) else f"({s})"


def to_text(e: Expr) -> str:
    """Print ``e`` so that ``parse(to_text(e))`` rebuilds the same tree."""
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"x{e.index + 1}"
    if isinstance(e, Param):
        return f"v{e.index + 1}"
    if isinstance(e, Sum):
        return " + ".join(_wrap(c) for c in e.children)
    if isinstance(e, Product):
        return " * ".join(_wrap(c) for c in e.children)
    if isinstance(e, Power):
        return f"{_wrap(e.child)}^{e.exponent}"
    if isinstance(e, Negate):
        return f"-{_wrap(e.child)}"
    if isinstance(e, (Max, Min)):
        name = "max" if isinstance(e, Max) else "min"
        return f"{name}(" + ", ".join(to_text(c) for c in e.children) + ")"
    if isinstance(e, Abs):
        return f"abs({to_text(e.child)})"
    raise TypeError(f"not an expression node: {e!r}")


# --- structure queries -----------------------------------------------------

def children(e: Expr) -> tuple:
    if isinstance(e, (Sum, Product, Max, Min)):
        return e.children
    if isinstance(e, (Power, Negate, Abs)):
        return (e.child,)
    return ()


def max_var_index(e: Expr, kind=Var) -> int:
    """Largest 1-based index of ``kind`` appearing in ``e`` (0 if none)."""
    if isinstance(e, kind):
        return e.index + 1
    return max((max_var_index(c, kind) for c in children(e)), default=0)


def is_smooth(e: Expr) -> bool:
    if isinstance(e, (Max, Min, Abs)):
        return False
    return all(is_smooth(c) for c in children(e))


# --- scalar evaluation -----------------------------------------------------

def _check_dims(e: Expr, x, v):
    nx = max_var_index(e, Var)
    nv = max_var_index(e, Param)
    if nx > len(x):
        raise ValueError(f"expression uses x{nx} but x has dimension {len(x)}")
    if nv > len(v):
        raise ValueError(f"expression uses v{nv} but v has dimension {len(v)}")


def _ipow(a, k: int):
    # repeated multiplication keeps scalar and batched paths bit-identical
    out = a
    for _ in range(k - 1):
        out = out * a
    return out


def _eval(e: Expr, x, v) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(x[e.index])
    if isinstance(e, Param):
        return float(v[e.index])
    if isinstance(e, Sum):
        acc = _eval(e.children[0], x, v)
        for c in e.children[1:]:
            acc = acc + _eval(c, x, v)
        return acc
    if isinstance(e, Product):
        acc = _eval(e.children[0], x, v)
        for c in e.children[1:]:
            acc = acc * _eval(c, x, v)
        return acc
    if isinstance(e, Power):
        return _ipow(_eval(e.child, x, v), e.exponent)
    if isinstance(e, Negate):
        return -_eval(e.child, x, v)
    if isinstance(e, Max):
        return max(_eval(c, x, v) for c in e.children)
    if isinstance(e, Min):
        return min(_eval(c, x, v) for c in e.children)
    if isinstance(e, Abs):
        return abs(_eval(e.child, x, v))
    raise TypeError(f"not an expression node: {e!r}")


def eval_expr(e: Expr, x: Sequence[float], v: Sequence[float] = ()) -> float:
    _check_dims(e, x, v)
    return float(_eval(e, x, v))


# --- batched evaluation ----------------------------------------------------

def compile_expr(e: Expr) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Return ``f(X, V)`` evaluating ``e`` on broadcast batches.

    ``X`` has shape ``(..., n)`` and ``V`` shape ``(..., q)``; the leading
    dimensions broadcast against each other.
    """

    def build(node):
        if isinstance(node, Const):
            c = node.value
            return lambda X, V: c
        if isinstance(node, Var):
            i = node.index
            return lambda X, V: X[..., i]
        if isinstance(node, Param):
            i = node.index
            return lambda X, V: V[..., i]
        fs = [build(c) for c in children(node)]
        if isinstance(node, Sum):
            def f(X, V):
                acc = fs[0](X, V)
                for g in fs[1:]:
                    acc = acc + g(X, V)
                return acc
            return f
        if isinstance(node, Product):
            def f(X, V):
                acc = fs[0](X, V)
                for g in fs[1:]:
                    acc = acc * g(X, V)
                return acc
            return f
        if isinstance(node, Power):
            k = node.exponent
            return lambda X, V: _ipow(fs[0](X, V), k)
        if isinstance(node, Negate):
            return lambda X, V: -fs[0](X, V)
        if isinstance(node, Max):
            def f(X, V):
                acc = fs[0](X, V)
                for g in fs[1:]:
                    acc = np.maximum(acc, g(X, V))
                return acc
            return f
        if isinstance(node, Min):
            def f(X, V):
                acc = fs[0](X, V)
                for g in fs[1:]:
                    acc = np.minimum(acc, g(X, V))
                return acc
            return f
        if isinstance(node, Abs):
            return lambda X, V: np.abs(fs[0](X, V))
        raise TypeError(f"not an expression node: {node!r}")

    inner = build(e)

    def run(X, V=None):
        X = np.asarray(X, dtype=float)
        if V is None:
            V = np.zeros(X.shape[:-1] + (0,))
        V = np.asarray(V, dtype=float)
        out = inner(X, V)
        shape = np.broadcast_shapes(X.shape[:-1], V.shape[:-1])
        return np.broadcast_to(np.asarray(out, dtype=float), shape)

    return run


def compile_value_grad(e: Expr, n: int):
    """Return ``f(X, V) -> (value, grad)`` with one subgradient selection.

    At kinks the first maximizing branch is selected (``abs`` uses the sign,
    zero at zero); smooth points get the exact gradient.
    """

    def build(node):
        if isinstance(node, Const):
            c = node.value
            return lambda X, V: (c, None)
        if isinstance(node, Var):
            i = node.index
            unit = np.zeros(n)
            unit[i] = 1.0

            # the unit row broadcasts against any batch shape downstream
            return lambda X, V: (X[..., i], unit)
        if isinstance(node, Param):
            i = node.index
            return lambda X, V: (V[..., i], None)
        fs = [build(c) for c in children(node)]

        def add_grad(a, b):
            if a is None:
                return b
            if b is None:
                return a
            return a + b

        def mul_grad(g, s):
            return None if g is None else g * np.asarray(s)[..., None]

        if isinstance(node, Sum):
            def f(X, V):
                val, grad = fs[0](X, V)
                for h in fs[1:]:
                    hv, hg = h(X, V)
                    val = val + hv
                    grad = add_grad(grad, hg)
                return val, grad
            return f
        if isinstance(node, Product):
            def f(X, V):
                val, grad = fs[0](X, V)
                for h in fs[1:]:
                    hv, hg = h(X, V)
                    grad = add_grad(mul_grad(grad, hv), mul_grad(hg, val))
                    val = val * hv
                return val, grad
            return f
        if isinstance(node, Power):
            k = node.exponent

            def f(X, V):
                cv, cg = fs[0](X, V)
                val = _ipow(cv, k)
                if k == 1:
                    return val, cg
                return val, mul_grad(cg, k * _ipow(cv, k - 1))
            return f
        if isinstance(node, Negate):
            def f(X, V):
                cv, cg = fs[0](X, V)
                return -cv, (None if cg is None else -cg)
            return f
        if isinstance(node, (Max, Min)):
            pick = np.greater if isinstance(node, Max) else np.less

            def f(X, V):
                val, grad = fs[0](X, V)
                for h in fs[1:]:
                    hv, hg = h(X, V)
                    better = pick(hv, val)
                    shape = np.broadcast_shapes(np.shape(val), np.shape(hv))
                    gz = np.zeros(shape + (n,))
                    g_old = gz if grad is None else grad + gz
                    g_new = gz if hg is None else hg + gz
                    grad = np.where(np.asarray(better)[..., None], g_new, g_old)
                    val = np.where(better, hv, val)
                return val, grad
            return f
        if isinstance(node, Abs):
            def f(X, V):
                cv, cg = fs[0](X, V)
                return np.abs(cv), mul_grad(cg, np.sign(cv))
            return f
        raise TypeError(f"not an expression node: {node!r}")

    inner = build(e)

    def run(X, V=None):
        X = np.asarray(X, dtype=float)
        if V is None:
            V = np.zeros(X.shape[:-1] + (0,))
        V = np.asarray(V, dtype=float)
        val, grad = inner(X, V)
        shape = np.broadcast_shapes(X.shape[:-1], V.shape[:-1])
        val = np.asarray(val, dtype=float)
        if val.shape != shape:
            val = np.broadcast_to(val, shape)
        if grad is None:
            grad = np.zeros(shape + (n,))
        elif grad.shape != shape + (n,):
            grad = np.broadcast_to(grad, shape + (n,))
        return val, grad

    return run


# --- subdifferential estimate ----------------------------------------------

@dataclass(frozen=True)
class SubdiffResult:
    polytope: Polytope
    is_exact: bool
    value: float


def _dedupe(verts: np.ndarray) -> np.ndarray:
    verts = np.unique(verts, axis=0) if len(verts) > 1 else verts
    if verts.shape[1] == 1 and len(verts) > 2:
        verts = np.array([[verts.min()], [verts.max()]])
    return verts


def _minkowski(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _dedupe((a[:, None, :] + b[None, :, :]).reshape(-1, a.shape[1]))


def _subdiff(e: Expr, x, v, n: int, tol: float):
    """Return (value, vertices, exact) for the upper estimate at ``x``."""
    if isinstance(e, Const):
        return e.value, np.zeros((1, n)), True
    if isinstance(e, Var):
        g = np.zeros((1, n))
        g[0, e.index] = 1.0
        return float(x[e.index]), g, True
    if isinstance(e, Param):
        return float(v[e.index]), np.zeros((1, n)), True
    if isinstance(e, Sum):
        val, verts, exact = _subdiff(e.children[0], x, v, n, tol)
        for c in e.children[1:]:
            cv, cverts, cex = _subdiff(c, x, v, n, tol)
            val = val + cv
            verts = _minkowski(verts, cverts)
            exact = exact and cex
        return val, verts, exact
    if isinstance(e, Product):
        # d(ab) in a(db) + b(da), applied left to right
        val, verts, exact = _subdiff(e.children[0], x, v, n, tol)
        for c in e.children[1:]:
            cv, cverts, cex = _subdiff(c, x, v, n, tol)
            verts = _minkowski(cv * verts, val * cverts)
            val = val * cv
            exact = exact and cex
        return val, verts, exact
    if isinstance(e, Power):
        cv, cverts, cex = _subdiff(e.child, x, v, n, tol)
        k = e.exponent
        factor = k * _ipow(cv, k - 1) if k > 1 else 1.0
        return _ipow(cv, k), _dedupe(factor * cverts), cex
    if isinstance(e, Negate):
        cv, cverts, cex = _subdiff(e.child, x, v, n, tol)
        return -cv, -cverts, cex
    if isinstance(e, Min):
        # min(a, b, ...) = -max(-a, -b, ...)
        val, verts, exact = _subdiff(Max(tuple(negate(c) for c in e.children)), x, v, n, tol)
        return -val, -verts, exact
    if isinstance(e, Max):
        parts = [_subdiff(c, x, v, n, tol) for c in e.children]
        top = max(p[0] for p in parts)
        active = [p for p in parts if p[0] >= top - tol]
        verts = _dedupe(np.vstack([p[1] for p in active]))
        exact = all(p[2] for p in active) and len(active) == 1
        return top, verts, exact
    if isinstance(e, Abs):
        cv, cverts, cex = _subdiff(e.child, x, v, n, tol)
        if abs(cv) > tol:
            return abs(cv), (np.sign(cv) * cverts), cex
        return abs(cv), _dedupe(np.vstack([cverts, -cverts])), False
    raise TypeError(f"not an expression node: {e!r}")


def subdiff(e: Expr, x: Sequence[float], v: Sequence[float] = (),
            tol_active: float = TOL_ACTIVE) -> SubdiffResult:
    """Upper estimate of the limiting subdifferential of ``e`` in ``x``.

    Smooth subtrees contribute exact gradients; sums combine by Minkowski sum,
    and each max/abs kink takes the convex hull of the active branches.
    """
    x = np.asarray(x, dtype=float).ravel()
    _check_dims(e, x, v)
    val, verts, exact = _subdiff(e, x, v, len(x), tol_active)
    return SubdiffResult(Polytope(verts), exact, float(val))


def kink_active(e: Expr, x, v=(), tol_active: float = TOL_ACTIVE) -> bool:
    """True when some max/min/abs node has more than one active branch at ``x``."""
    if isinstance(e, (Max, Min)):
        vals = [_eval(c, x, v) for c in e.children]
        if isinstance(e, Min):
            vals = [-a for a in vals]
        top = max(vals)
        if sum(1 for a in vals if a >= top - tol_active) > 1:
            return True
    if isinstance(e, Abs) and abs(_eval(e.child, x, v)) <= tol_active:
        return True
    return any(kink_active(c, x, v, tol_active) for c in children(e))


def grad_check(e: Expr, x: Sequence[float], v: Sequence[float] = (), h: float = 1e-5,
               tol_active: float = TOL_ACTIVE) -> float:
    """Max relative deviation between the gradient and central differences.

    Deviation per coordinate is ``|fd - g| / max(|g|, 1)``.
    """
    x = np.asarray(x, dtype=float).ravel()
    _check_dims(e, x, v)
    if kink_active(e, x, v, tol_active):
        raise ValueError("kink active at x: gradient check needs a smooth point")
    res = subdiff(e, x, v, tol_active)
    g = res.polytope.vertices[0]
    worst = 0.0
    for i in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd = (_eval(e, xp, v) - _eval(e, xm, v)) / (2 * h)
        worst = max(worst, abs(fd - g[i]) / max(abs(g[i]), 1.0))
    return worst


def selections(polys: Sequence[Polytope]):
    """Iterate over every choice of one vertex per polytope."""
    return itertools.product(*[range(len(p.vertices)) for p in polys])
