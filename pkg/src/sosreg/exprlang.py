"""Differentiable expression trees over named real variables.

A small expression language (sums, products, quotients, real powers, exp/ln/
sin/cos, the flat primitive flatexp(u) = exp(-1/u) for u > 0, and piecewise
nodes for smooth plateau bumps) with exact symbolic partial derivatives to
arbitrary order and numpy-vectorized evaluation.  The module also ships the
catalog of named test functions used throughout the package.

Expressions are immutable; evaluation and differentiation are pure, so trees
may be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Ball

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Sum",
    "Neg",
    "Prod",
    "Quot",
    "Pow",
    "Exp",
    "Ln",
    "Sin",
    "Cos",
    "FlatExp",
    "Piecewise",
    "ExprError",
    "ParseError",
    "parse_expression",
    "parse_function_file",
    "to_source",
    "evaluate",
    "differentiate",
    "free_variables",
    "has_conditionals",
    "FunctionDef",
    "catalog_function",
    "catalog_names",
    "glaeser_stub_with",
]


class ExprError(Exception):
    """Base error for the expression language."""


class ParseError(ExprError):
    """Syntax or identifier error, carrying line/column information."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------


class Expr:
    """Base class for expression nodes.  Nodes are frozen dataclasses."""

    def __add__(self, other):
        return Sum((self, _as_expr(other)))

    def __radd__(self, other):
        return Sum((_as_expr(other), self))

    def __sub__(self, other):
        return Sum((self, Neg(_as_expr(other))))

    def __rsub__(self, other):
        return Sum((_as_expr(other), Neg(self)))

    def __mul__(self, other):
        return Prod((self, _as_expr(other)))

    def __rmul__(self, other):
        return Prod((_as_expr(other), self))

    def __truediv__(self, other):
        return Quot(self, _as_expr(other))

    def __rtruediv__(self, other):
        return Quot(_as_expr(other), self)

    def __pow__(self, p):
        return Pow(self, float(p))

    def __neg__(self):
        return Neg(self)


def _as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(float(x))


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Prod(Expr):
    factors: tuple


@dataclass(frozen=True)
class Quot(Expr):
    num: Expr
    den: Expr


@dataclass(frozen=True)
class Pow(Expr):
    """base ** exponent with a real (literal) exponent."""

    base: Expr
    exponent: float


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True)
class Ln(Expr):
    arg: Expr


@dataclass(frozen=True)
class Sin(Expr):
    arg: Expr


@dataclass(frozen=True)
class Cos(Expr):
    arg: Expr


@dataclass(frozen=True)
class FlatExp(Expr):
    """flatexp(u) = exp(-1/u) for u > 0 and 0 for u <= 0.

    The standard smooth function vanishing to infinite order as u -> 0+.
    Evaluates to exactly 0.0 at u <= 0 (no NaN), which keeps compositions
    like flatexp(t^2) well defined at the flat point.
    """

    arg: Expr


@dataclass(frozen=True)
class Piecewise(Expr):
    """Region-conditional expression.

    branches[0] applies where scrutinee <= breaks[0], branches[i] where
    breaks[i-1] < scrutinee <= breaks[i], and branches[-1] elsewhere.
    Differentiation is branchwise and therefore exact only away from the
    seams; all constructions in this package glue branches smoothly.
    """

    scrutinee: Expr
    breaks: tuple
    branches: tuple

    def __post_init__(self):
        if len(self.branches) != len(self.breaks) + 1:
            raise ExprError(
                f"piecewise needs {len(self.breaks) + 1} branches for "
                f"{len(self.breaks)} breakpoints, got {len(self.branches)}"
            )
        if list(self.breaks) != sorted(self.breaks):
            raise ExprError("piecewise breakpoints must be increasing")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(e: Expr, env: dict):
    """Evaluate e with variables bound to scalars or numpy arrays.

    Shared subtrees (expressions are DAGs after differentiation) evaluate
    once per call.  Intermediate overflow/invalid warnings are suppressed:
    out-of-branch values of piecewise nodes and the guarded flatexp primitive
    legitimately produce inf/NaN that never reach the selected result.
    """
    with np.errstate(all="ignore"):
        return _eval(e, env, {})


def _eval(e: Expr, env, memo: dict):
    key = id(e)
    got = memo.get(key)
    if got is not None:
        return got
    out = _eval_node(e, env, memo)
    memo[key] = out
    return out


def _eval_node(e: Expr, env, memo):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise ExprError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Sum):
        acc = _eval(e.terms[0], env, memo)
        for t in e.terms[1:]:
            acc = acc + _eval(t, env, memo)
        return acc
    if isinstance(e, Neg):
        return -_eval(e.arg, env, memo)
    if isinstance(e, Prod):
        acc = _eval(e.factors[0], env, memo)
        for f in e.factors[1:]:
            acc = acc * _eval(f, env, memo)
        return acc
    if isinstance(e, Quot):
        return _eval(e.num, env, memo) / _eval(e.den, env, memo)
    if isinstance(e, Pow):
        b = _eval(e.base, env, memo)
        p = e.exponent
        if p == int(p):
            return np.power(b, int(p))
        return np.power(b, p)
    if isinstance(e, Exp):
        return np.exp(_eval(e.arg, env, memo))
    if isinstance(e, Ln):
        return np.log(_eval(e.arg, env, memo))
    if isinstance(e, Sin):
        return np.sin(_eval(e.arg, env, memo))
    if isinstance(e, Cos):
        return np.cos(_eval(e.arg, env, memo))
    if isinstance(e, FlatExp):
        # dtype preserved: callers may evaluate in extended precision
        u = np.asarray(_eval(e.arg, env, memo))
        out = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, u.dtype.type(1.0))), u.dtype.type(0.0))
        return out if out.ndim else out[()]
    if isinstance(e, Piecewise):
        s = np.asarray(_eval(e.scrutinee, env, memo))
        vals = [np.asarray(_eval(b, env, memo)) for b in e.branches]
        shape = np.broadcast_shapes(s.shape, *(v.shape for v in vals))
        s = np.broadcast_to(s, shape)
        vals = [np.broadcast_to(v, shape) for v in vals]
        conds = [s <= b for b in e.breaks]
        conds.append(np.ones(shape, dtype=bool))  # NaN scrutinee falls to the last branch
        out = np.select(conds, vals)
        return out if out.ndim else out[()]
    raise ExprError(f"cannot evaluate node {type(e).__name__}")


def free_variables(e: Expr) -> set:
    out: set = set()
    _collect_vars(e, out)
    return out


def _collect_vars(e: Expr, out: set):
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, Sum):
        for t in e.terms:
            _collect_vars(t, out)
    elif isinstance(e, Prod):
        for f in e.factors:
            _collect_vars(f, out)
    elif isinstance(e, Neg):
        _collect_vars(e.arg, out)
    elif isinstance(e, Quot):
        _collect_vars(e.num, out)
        _collect_vars(e.den, out)
    elif isinstance(e, Pow):
        _collect_vars(e.base, out)
    elif isinstance(e, (Exp, Ln, Sin, Cos, FlatExp)):
        _collect_vars(e.arg, out)
    elif isinstance(e, Piecewise):
        _collect_vars(e.scrutinee, out)
        for b in e.branches:
            _collect_vars(b, out)


def has_conditionals(e: Expr) -> bool:
    """True if e contains piecewise or flatexp nodes, whose derivatives are
    exact only away from the seam set."""
    if isinstance(e, (Piecewise, FlatExp)):
        return True
    if isinstance(e, Sum):
        return any(has_conditionals(t) for t in e.terms)
    if isinstance(e, Prod):
        return any(has_conditionals(f) for f in e.factors)
    if isinstance(e, Neg):
        return has_conditionals(e.arg)
    if isinstance(e, Quot):
        return has_conditionals(e.num) or has_conditionals(e.den)
    if isinstance(e, Pow):
        return has_conditionals(e.base)
    if isinstance(e, (Exp, Ln, Sin, Cos)):
        return has_conditionals(e.arg)
    return False


# ---------------------------------------------------------------------------
# Simplification (identity pruning and constant folding only; no CAS rewriting)
# ---------------------------------------------------------------------------


def simplify(e: Expr) -> Expr:
    """Identity pruning and constant folding, preserving subtree sharing."""
    return _simplify(e, {})


def _simplify(e: Expr, memo: dict) -> Expr:
    key = id(e)
    got = memo.get(key)
    if got is not None:
        return got
    # ids stay unambiguous during the call: every visited node is reachable
    # from the root reference held by the caller
    out = _simplify_node(e, memo)
    memo[key] = out
    return out


def _simplify_node(e: Expr, memo: dict) -> Expr:
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Sum):
        terms = []
        const = 0.0
        for t in e.terms:
            t = _simplify(t, memo)
            if isinstance(t, Sum):
                inner = t.terms
            else:
                inner = (t,)
            for u in inner:
                if isinstance(u, Const):
                    const += u.value
                elif isinstance(u, Neg) and isinstance(u.arg, Const):
                    const -= u.arg.value
                else:
                    terms.append(u)
        if const != 0.0 or not terms:
            terms.append(Const(const))
        if len(terms) == 1:
            return terms[0]
        return Sum(tuple(terms))
    if isinstance(e, Neg):
        a = _simplify(e.arg, memo)
        if isinstance(a, Const):
            return Const(-a.value)
        if isinstance(a, Neg):
            return a.arg
        return Neg(a)
    if isinstance(e, Prod):
        factors = []
        const = 1.0
        for f in e.factors:
            f = _simplify(f, memo)
            if isinstance(f, Prod):
                inner = f.factors
            else:
                inner = (f,)
            for u in inner:
                if isinstance(u, Const):
                    const *= u.value
                else:
                    factors.append(u)
        if const == 0.0:
            return Const(0.0)
        if const != 1.0 or not factors:
            factors.insert(0, Const(const))
        if len(factors) == 1:
            return factors[0]
        return Prod(tuple(factors))
    if isinstance(e, Quot):
        num = _simplify(e.num, memo)
        den = _simplify(e.den, memo)
        if isinstance(num, Const) and num.value == 0.0:
            return Const(0.0)
        if isinstance(den, Const) and den.value == 1.0:
            return num
        if isinstance(num, Const) and isinstance(den, Const) and den.value != 0.0:
            return Const(num.value / den.value)
        return Quot(num, den)
    if isinstance(e, Pow):
        base = _simplify(e.base, memo)
        if e.exponent == 0.0:
            return Const(1.0)
        if e.exponent == 1.0:
            return base
        if isinstance(base, Const):
            if base.value > 0 or float(e.exponent).is_integer():
                return Const(float(base.value**e.exponent))
        return Pow(base, e.exponent)
    if isinstance(e, Exp):
        a = _simplify(e.arg, memo)
        if isinstance(a, Const):
            return Const(math.exp(a.value))
        return Exp(a)
    if isinstance(e, Ln):
        a = _simplify(e.arg, memo)
        if isinstance(a, Const) and a.value > 0:
            return Const(math.log(a.value))
        return Ln(a)
    if isinstance(e, Sin):
        a = _simplify(e.arg, memo)
        if isinstance(a, Const):
            return Const(math.sin(a.value))
        return Sin(a)
    if isinstance(e, Cos):
        a = _simplify(e.arg, memo)
        if isinstance(a, Const):
            return Const(math.cos(a.value))
        return Cos(a)
    if isinstance(e, FlatExp):
        a = _simplify(e.arg, memo)
        if isinstance(a, Const):
            return Const(math.exp(-1.0 / a.value) if a.value > 0 else 0.0)
        return FlatExp(a)
    if isinstance(e, Piecewise):
        branches = tuple(_simplify(b, memo) for b in e.branches)
        if all(b == branches[0] for b in branches[1:]):
            return branches[0]
        return Piecewise(_simplify(e.scrutinee, memo), e.breaks, branches)
    raise ExprError(f"cannot simplify node {type(e).__name__}")


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

MAX_DERIVATIVE_ORDER = 8


def differentiate(e: Expr, variable: str, order: int = 1) -> Expr:
    """Exact symbolic partial derivative of the given order.

    Piecewise and flatexp nodes differentiate branchwise; the result is exact
    away from seam points (use has_conditionals to detect them and fall back
    to finite differences there if needed).
    """
    if order < 1:
        raise ExprError(f"derivative order must be >= 1, got {order}")
    if order > MAX_DERIVATIVE_ORDER:
        raise ExprError(f"derivative order {order} exceeds the supported maximum {MAX_DERIVATIVE_ORDER}")
    out = e
    for _ in range(order):
        out = simplify(_d(out, variable, {}))
    return out


def _d(e: Expr, v: str, memo: dict) -> Expr:
    key = id(e)
    got = memo.get(key)
    if got is not None:
        return got
    out = _d_node(e, v, memo)
    memo[key] = out
    return out


def _d_node(e: Expr, v: str, memo: dict) -> Expr:
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.name == v else 0.0)
    if isinstance(e, Sum):
        return Sum(tuple(_d(t, v, memo) for t in e.terms))
    if isinstance(e, Neg):
        return Neg(_d(e.arg, v, memo))
    if isinstance(e, Prod):
        terms = []
        for i in range(len(e.factors)):
            fs = list(e.factors)
            fs[i] = _d(fs[i], v, memo)
            terms.append(Prod(tuple(fs)))
        return Sum(tuple(terms))
    if isinstance(e, Quot):
        da, db = _d(e.num, v, memo), _d(e.den, v, memo)
        return Quot(Sum((Prod((da, e.den)), Neg(Prod((e.num, db))))), Pow(e.den, 2.0))
    if isinstance(e, Pow):
        return Prod((Const(e.exponent), Pow(e.base, e.exponent - 1.0), _d(e.base, v, memo)))
    if isinstance(e, Exp):
        return Prod((Exp(e.arg), _d(e.arg, v, memo)))
    if isinstance(e, Ln):
        return Quot(_d(e.arg, v, memo), e.arg)
    if isinstance(e, Sin):
        return Prod((Cos(e.arg), _d(e.arg, v, memo)))
    if isinstance(e, Cos):
        return Neg(Prod((Sin(e.arg), _d(e.arg, v, memo))))
    if isinstance(e, FlatExp):
        u = e.arg
        smooth_part = Prod((FlatExp(u), Quot(_d(u, v, memo), Pow(u, 2.0))))
        return Piecewise(u, (0.0,), (Const(0.0), smooth_part))
    if isinstance(e, Piecewise):
        return Piecewise(e.scrutinee, e.breaks, tuple(_d(b, v, memo) for b in e.branches))
    raise ExprError(f"cannot differentiate node {type(e).__name__}")


# ---------------------------------------------------------------------------
# Printing: to_source(parse_expression(s)) round-trips structurally
# ---------------------------------------------------------------------------


def _fmt_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def to_source(e: Expr) -> str:
    return _print(e, 0)


# precedence levels: 0 sum, 1 product, 2 unary minus, 3 power, 4 atom
def _print(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Const):
        if e.value < 0:
            s = "-" + _fmt_number(-e.value)
            return f"({s})" if parent_prec > 2 else s
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Sum):
        parts = [_print(e.terms[0], 1)]
        for t in e.terms[1:]:
            if isinstance(t, Neg):
                parts.append(" - " + _print(t.arg, 1))
            else:
                parts.append(" + " + _print(t, 1))
        s = "".join(parts)
        return f"({s})" if parent_prec > 0 else s
    if isinstance(e, Neg):
        # '-' binds tighter than '^' in the grammar, so guard power arguments
        s = "-" + _print(e.arg, 4)
        return f"({s})" if parent_prec > 1 else s
    if isinstance(e, Prod):
        s = "*".join(_print(f, 2) for f in e.factors)
        return f"({s})" if parent_prec > 1 else s
    if isinstance(e, Quot):
        s = _print(e.num, 2) + "/" + _print(e.den, 3)
        return f"({s})" if parent_prec > 1 else s
    if isinstance(e, Pow):
        p = e.exponent
        ps = _fmt_number(p) if p >= 0 else "-" + _fmt_number(-p)
        s = _print(e.base, 4) + "^" + ps
        return f"({s})" if parent_prec > 3 else s
    for cls, name in ((Exp, "exp"), (Ln, "ln"), (Sin, "sin"), (Cos, "cos"), (FlatExp, "flatexp")):
        if isinstance(e, cls):
            return f"{name}({_print(e.arg, 0)})"
    if isinstance(e, Piecewise):
        args = [_print(e.scrutinee, 0)]
        for b, br in zip(e.breaks, e.branches[:-1]):
            args.append(_fmt_number(b) if b >= 0 else "-" + _fmt_number(-b))
            args.append(_print(br, 0))
        args.append(_print(e.branches[-1], 0))
        return "piecewise(" + ", ".join(args) + ")"
    raise ExprError(f"cannot print node {type(e).__name__}")


# ---------------------------------------------------------------------------
# Parser.  Grammar:
#   expr   := term (('+'|'-') term)*
#   term   := factor (('*'|'/') factor)*
#   factor := base ('^' signed_number)?
#   base   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')' | '-' base
# ---------------------------------------------------------------------------

_FUNCTIONS = {"exp": 1, "ln": 1, "sin": 1, "cos": 1, "sqrt": 1, "flatexp": 1, "piecewise": None}


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col


def _tokenize(src: str):
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        ch = src[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < len(src) and src[i] != "\n":
                i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < len(src) and src[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < len(src) and (src[j].isdigit() or (src[j] == "." and not seen_dot)):
                if src[j] == ".":
                    seen_dot = True
                j += 1
            if j < len(src) and src[j] in "eE":
                k = j + 1
                if k < len(src) and src[k] in "+-":
                    k += 1
                if k < len(src) and src[k].isdigit():
                    j = k
                    while j < len(src) and src[j].isdigit():
                        j += 1
            tokens.append(_Token("number", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(src) and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(_Token("ident", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in "+-*/^(),=":
            tokens.append(_Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str) -> _Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"expected {kind!r}, found {t.text!r}", t.line, t.col)
        return self.next()

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        terms = [node]
        while self.peek().kind in ("+", "-"):
            op = self.next()
            # reject `x ++ y` style runs explicitly
            if self.peek().kind in ("+",):
                t = self.peek()
                raise ParseError("unexpected '+'", t.line, t.col)
            rhs = self.parse_term()
            terms.append(Neg(rhs) if op.kind == "-" else rhs)
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.peek().kind in ("*", "/"):
            op = self.next()
            rhs = self.parse_factor()
            if op.kind == "*":
                node = Prod((node, rhs)) if not isinstance(node, Prod) else Prod(node.factors + (rhs,))
            else:
                node = Quot(node, rhs)
        return node

    def parse_factor(self) -> Expr:
        node = self.parse_base()
        if self.peek().kind == "^":
            self.next()
            sign = 1.0
            if self.peek().kind == "-":
                self.next()
                sign = -1.0
            t = self.expect("number")
            node = Pow(node, sign * float(t.text))
        return node

    def parse_base(self) -> Expr:
        t = self.peek()
        if t.kind == "number":
            self.next()
            return Const(float(t.text))
        if t.kind == "-":
            self.next()
            inner = self.parse_base()
            # normalize so that printed negative constants round-trip structurally
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        if t.kind == "(":
            self.next()
            node = self.parse_expr()
            self.expect(")")
            return node
        if t.kind == "ident":
            self.next()
            if self.peek().kind != "(":
                return Var(t.text)
            if t.text not in _FUNCTIONS:
                raise ParseError(f"unknown function identifier {t.text!r}", t.line, t.col)
            self.next()
            args = [self.parse_expr()]
            while self.peek().kind == ",":
                self.next()
                args.append(self.parse_expr())
            self.expect(")")
            arity = _FUNCTIONS[t.text]
            if arity is not None and len(args) != arity:
                raise ParseError(
                    f"{t.text} expects {arity} argument(s), got {len(args)}", t.line, t.col
                )
            return _build_call(t.text, args, t)
        raise ParseError(f"unexpected token {t.text!r}", t.line, t.col)


def _build_call(name: str, args: list, tok: _Token) -> Expr:
    if name == "exp":
        return Exp(args[0])
    if name == "ln":
        return Ln(args[0])
    if name == "sin":
        return Sin(args[0])
    if name == "cos":
        return Cos(args[0])
    if name == "sqrt":
        return Pow(args[0], 0.5)
    if name == "flatexp":
        return FlatExp(args[0])
    # piecewise(scrutinee, break0, branch0, ..., last_branch)
    if len(args) < 2 or len(args) % 2 != 0:
        raise ParseError(
            "piecewise expects (scrutinee, break, branch, ..., default_branch)", tok.line, tok.col
        )
    scrutinee = args[0]
    breaks = []
    branches = []
    rest = args[1:]
    for i in range(0, len(rest) - 1, 2):
        b = simplify(rest[i])
        if not isinstance(b, Const):
            raise ParseError("piecewise breakpoints must be constants", tok.line, tok.col)
        breaks.append(b.value)
        branches.append(rest[i + 1])
    branches.append(rest[-1])
    return Piecewise(scrutinee, tuple(breaks), tuple(branches))


def parse_expression(source: str) -> Expr:
    """Parse source text into an expression tree."""
    parser = _Parser(_tokenize(source))
    node = parser.parse_expr()
    t = parser.peek()
    if t.kind != "eof":
        raise ParseError(f"unexpected trailing input {t.text!r}", t.line, t.col)
    return node


# ---------------------------------------------------------------------------
# Function definitions and files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionDef:
    """A named function: ordered variables, expression body, domain ball.

    sample_box, when present, is a per-variable (lo, hi) box of recommended
    interior sample points that avoids the function's singular margins.
    """

    name: str
    variables: tuple
    body: Expr
    domain: Ball
    smoothness_order: int = 8
    nonnegative: bool = False
    sample_box: tuple | None = None

    def __post_init__(self):
        extra = free_variables(self.body) - set(self.variables)
        if extra:
            raise ExprError(f"body of {self.name!r} uses undeclared variables {sorted(extra)}")
        if self.smoothness_order < 4:
            raise ExprError("declared smoothness order must be >= 4")

    @property
    def arity(self) -> int:
        return len(self.variables)

    def __call__(self, *args):
        env = dict(zip(self.variables, args))
        return evaluate(self.body, env)


def parse_function_file(text: str) -> dict:
    """Parse lines of the form `def name(v1, v2) = expr`; '#' starts a comment."""
    defs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.startswith("def "):
            raise ParseError("expected 'def name(vars) = expr'", lineno, 1)
        head, _, body_src = line[4:].partition("=")
        if not body_src:
            raise ParseError("missing '=' in function definition", lineno, len(line))
        head = head.strip()
        if "(" not in head or not head.endswith(")"):
            raise ParseError("malformed definition header", lineno, 5)
        name, _, var_part = head.partition("(")
        name = name.strip()
        variables = tuple(v.strip() for v in var_part[:-1].split(",") if v.strip())
        body = parse_expression(body_src)
        extra = free_variables(body) - set(variables)
        if extra:
            raise ParseError(f"unknown identifier(s) {sorted(extra)} in body of {name!r}", lineno, 1)
        defs[name] = FunctionDef(
            name=name,
            variables=variables,
            body=body,
            domain=Ball(center=(0.0,) * len(variables), radius=1.0),
        )
    return defs


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------


def _smooth_step(v: Expr) -> Expr:
    """q(v) = E(v) / (E(v) + E(1-v)) with E = flatexp: 0 at v<=0, 1 at v>=1, C^inf."""
    ev = FlatExp(v)
    e1v = FlatExp(Sum((Const(1.0), Neg(v))))
    return Quot(ev, Sum((ev, e1v)))


def bump_plateau_expr(var: str, rho: float) -> Expr:
    """Even C^inf plateau in one variable: 1 on [0, rho], 0 outside (-1, 1).

    Built on the scrutinee u = var^2 so the expression is abs-free; the
    transition on rho < |var| < 1 is the flatexp quotient q((1-|var|)/(1-rho)).
    """
    if not 0.0 < rho < 1.0:
        raise ExprError(f"plateau parameter must lie in (0,1), got {rho}")
    t = Var(var)
    u = Pow(t, 2.0)
    absval = Pow(u, 0.5)
    v = Quot(Sum((Const(1.0), Neg(absval))), Const(1.0 - rho))
    return Piecewise(u, (rho * rho, 1.0), (Const(1.0), _smooth_step(v), Const(0.0)))


def _motzkin_body(lam: float) -> Expr:
    x, y, z = Var("x"), Var("y"), Var("z")
    return Sum(
        (
            Pow(z, 6.0),
            Prod(
                (
                    Pow(x, 2.0),
                    Pow(y, 2.0),
                    Sum((Pow(x, 2.0), Pow(y, 2.0), Neg(Prod((Const(3.0 * lam), Pow(z, 2.0)))))),
                )
            ),
        )
    )


def _quartic_body() -> Expr:
    w, x, y, z = Var("w"), Var("x"), Var("y"), Var("z")
    return Sum(
        (
            Pow(w, 4.0),
            Prod((Pow(x, 2.0), Pow(y, 2.0))),
            Prod((Pow(y, 2.0), Pow(z, 2.0))),
            Prod((Pow(z, 2.0), Pow(x, 2.0))),
            Neg(Prod((Const(2.0), w, x, y, z))),
        )
    )


def family_body(s_prime: float = 0.5, rho: float = 0.5) -> Expr:
    """Five-variable family phi(t)*L(w,x,y,z) + psi(t) + phi(r)*h_rho(t/r).

    phi(t) = flatexp(t^2), psi(t) = phi(t/2)^(1/s') * t^(4/s') (even form via
    t^2 powers), r = |(w,x,y,z)|; the plateau argument is guarded through the
    scrutinee u = t^2/r^2, which lands in the vanishing branch as r -> 0.
    """
    if not 0.0 < s_prime < 1.0:
        raise ExprError(f"s_prime must lie in (0,1), got {s_prime}")
    if not 0.0 < rho < 1.0:
        raise ExprError(f"rho must lie in (0,1), got {rho}")
    w, x, y, z, t = (Var(v) for v in "wxyzt")
    t2 = Pow(t, 2.0)
    r2 = Sum((Pow(w, 2.0), Pow(x, 2.0), Pow(y, 2.0), Pow(z, 2.0)))
    phi_t = FlatExp(t2)
    # phi(t/2) = exp(-4/t^2) = flatexp(t^2/4)
    psi = Prod(
        (
            Pow(FlatExp(Quot(t2, Const(4.0))), 1.0 / s_prime),
            Pow(t2, 2.0 / s_prime),
        )
    )
    phi_r = FlatExp(r2)
    u = Quot(t2, r2)
    absval = Pow(u, 0.5)
    v = Quot(Sum((Const(1.0), Neg(absval))), Const(1.0 - rho))
    h = Piecewise(u, (rho * rho, 1.0), (Const(1.0), _smooth_step(v), Const(0.0)))
    return Sum((Prod((phi_t, _quartic_body())), psi, Prod((phi_r, h))))


def glaeser_stub_with(g: Expr, variables: tuple) -> FunctionDef:
    """Construction hook: the flat function exp(-1/g) for a user-supplied g > 0."""
    return FunctionDef(
        name="glaeser_stub",
        variables=tuple(variables),
        body=FlatExp(g),
        domain=Ball(center=(0.0,) * len(variables), radius=1.0),
        nonnegative=True,
        sample_box=((0.55, 0.95),) * len(variables),
    )


_CATALOG_PARAMS = {
    "motzkin_M": ("lam",),
    "quartic_L": (),
    "flat_exp_sq": (),
    "flat_exp": (),
    "bump_h": ("rho",),
    "family_f": ("s_prime", "rho"),
    "glaeser_stub": (),
}


def catalog_names() -> tuple:
    return tuple(_CATALOG_PARAMS)


def catalog_function(name: str, params: dict | None = None) -> FunctionDef:
    """Return a catalog entry by name.

    Entries: motzkin_M(lam), quartic_L, flat_exp_sq, flat_exp, bump_h(rho),
    family_f(s_prime, rho), glaeser_stub.
    """
    params = dict(params or {})
    if name not in _CATALOG_PARAMS:
        raise ExprError(f"unknown catalog name {name!r}; known: {', '.join(_CATALOG_PARAMS)}")
    allowed = _CATALOG_PARAMS[name]
    unknown = set(params) - set(allowed)
    if unknown:
        raise ExprError(f"{name} does not accept parameter(s) {sorted(unknown)}")

    if name == "motzkin_M":
        lam = float(params.get("lam", 1.0))
        if not 0.0 <= lam <= 1.0:
            raise ExprError(f"motzkin_M requires lam in [0,1], got {lam}")
        return FunctionDef(
            name="motzkin_M",
            variables=("x", "y", "z"),
            body=_motzkin_body(lam),
            domain=Ball(center=(0.0, 0.0, 0.0), radius=2.0),
            nonnegative=True,
            sample_box=((-1.0, 1.0),) * 3,
        )
    if name == "quartic_L":
        return FunctionDef(
            name="quartic_L",
            variables=("w", "x", "y", "z"),
            body=_quartic_body(),
            domain=Ball(center=(0.0,) * 4, radius=2.0),
            nonnegative=True,
            sample_box=((-1.0, 1.0),) * 4,
        )
    if name == "flat_exp_sq":
        return FunctionDef(
            name="flat_exp_sq",
            variables=("t",),
            body=FlatExp(Pow(Var("t"), 2.0)),
            domain=Ball(center=(0.0,), radius=1.0),
            nonnegative=True,
            # below t ~ 0.5 the derivative growth rate outpaces what double
            # precision finite differences can certify at order four
            sample_box=((0.55, 0.95),),
        )
    if name == "flat_exp":
        return FunctionDef(
            name="flat_exp",
            variables=("t",),
            body=FlatExp(Var("t")),
            domain=Ball(center=(0.5,), radius=0.5),
            nonnegative=True,
            sample_box=((0.3, 0.95),),
        )
    if name == "bump_h":
        rho = float(params.get("rho", 0.5))
        return FunctionDef(
            name="bump_h",
            variables=("t",),
            body=bump_plateau_expr("t", rho),
            domain=Ball(center=(0.0,), radius=1.5),
            nonnegative=True,
            # keep test samples inside one smooth piece, away from the seams
            sample_box=((rho + 0.12, 0.88),),
        )
    if name == "family_f":
        s_prime = float(params.get("s_prime", 0.5))
        rho = float(params.get("rho", 0.5))
        return FunctionDef(
            name="family_f",
            variables=("w", "x", "y", "z", "t"),
            body=family_body(s_prime=s_prime, rho=rho),
            domain=Ball(center=(0.0,) * 5, radius=1.0),
            nonnegative=True,
            # r ~ 0.6 and t in the vanished plateau piece: every stencil point
            # stays in one smooth branch and derivative growth stays tame
            sample_box=((0.28, 0.36), (0.28, 0.36), (0.28, 0.36), (0.28, 0.36), (0.8, 0.95)),
        )
    # glaeser_stub: default inner function g(t) = t^2; see glaeser_stub_with
    return glaeser_stub_with(Pow(Var("t"), 2.0), ("t",))


def catalog_formula(name: str, params: dict | None = None) -> str:
    return to_source(catalog_function(name, params).body)
