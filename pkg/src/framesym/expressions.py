"""Scalar expression language over named coordinates.

Grammar: numbers, coordinate names, ``+ - * / ^``, parentheses and the fixed
function set sin cos tan exp log sqrt sinh cosh tanh atan.  ``^`` is
right-associative and binds tighter than ``* /``, which bind tighter than
``+ -``.  Unary minus binds looser than ``^``, so ``-x^2`` means ``-(x^2)``.
Identifiers are ASCII letters/digits/underscore starting with a letter.

ASTs are immutable; parsing and evaluation are pure.  The pretty-printer
emits canonical text that re-parses to a structurally identical AST.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ParseError, UnknownIdentifier
from .jets import Jet, jet_compose, jet_constant, jet_mul, jet_pow_int, jet_variable

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh", "atan")

_NUMPY_FN = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "sinh": np.sinh, "cosh": np.cosh,
    "tanh": np.tanh, "atan": np.arctan,
}


@dataclass(frozen=True)
class Lit:
    value: float


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Lit, Var, Neg, Add, Sub, Mul, Div, Pow, Call]

_BINOP = {"+": Add, "-": Sub, "*": Mul, "/": Div, "^": Pow}
_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_PREC_POW = 30
_PREC_NEG = 25


# ---------------------------------------------------------------- tokenizer

def _is_digit(c: str) -> bool:
    return "0" <= c <= "9"


def _is_letter(c: str) -> bool:
    return "a" <= c <= "z" or "A" <= c <= "Z"


def _tokenize(source: str) -> list[tuple[str, object, int]]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if _is_digit(c) or (c == "." and i + 1 < n and _is_digit(source[i + 1])):
            start = i
            while i < n and (_is_digit(source[i]) or source[i] == "."):
                i += 1
            if i < n and source[i] in "eE":
                j = i + 1
                if j < n and source[j] in "+-":
                    j += 1
                if j < n and _is_digit(source[j]):
                    i = j
                    while i < n and _is_digit(source[i]):
                        i += 1
            text = source[start:i]
            try:
                value = float(text)
            except ValueError:
                raise ParseError(f"malformed number '{text}'", start) from None
            tokens.append(("num", value, start))
            continue
        if _is_letter(c):
            start = i
            while i < n and (_is_letter(source[i]) or _is_digit(source[i])
                             or source[i] == "_"):
                i += 1
            tokens.append(("ident", source[start:i], start))
            continue
        if c in "+-*/^()":
            tokens.append((c, c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character '{c}'", i)
    tokens.append(("end", None, n))
    return tokens


# ------------------------------------------------------------------- parser

class _Parser:
    def __init__(self, source: str, coords: list[str]):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.coord_index = {name: k for k, name in enumerate(coords)}

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expression(self, min_prec: int) -> Expr:
        lhs = self.atom()
        while True:
            kind, _, _ = self.peek()
            prec = _PREC.get(kind)
            if prec is None or prec < min_prec:
                return lhs
            self.advance()
            # '^' is right-associative: recurse at the same precedence
            rhs = self.expression(prec if kind == "^" else prec + 1)
            lhs = _BINOP[kind](lhs, rhs)

    def atom(self) -> Expr:
        kind, value, pos = self.advance()
        if kind == "num":
            return Lit(float(value))
        if kind == "-":
            return Neg(self.expression(_PREC_POW))
        if kind == "(":
            inner = self.expression(0)
            kind, _, pos = self.advance()
            if kind != ")":
                raise ParseError("expected ')'", pos)
            return inner
        if kind == "ident":
            if self.peek()[0] == "(":
                if value not in FUNCTIONS:
                    raise UnknownIdentifier(value, pos)
                self.advance()
                arg = self.expression(0)
                kind, _, cpos = self.advance()
                if kind != ")":
                    raise ParseError("expected ')' closing function call", cpos)
                return Call(value, arg)
            if value in self.coord_index:
                return Var(self.coord_index[value], value)
            if value in FUNCTIONS:
                raise ParseError(f"function '{value}' needs an argument list", pos)
            raise UnknownIdentifier(value, pos)
        raise ParseError(f"unexpected token '{value if value is not None else kind}'", pos)


def parse(source: str, coords) -> Expr:
    """Parse ``source`` over the coordinate names ``coords`` into an AST."""
    coords = list(coords)
    if len(set(coords)) != len(coords):
        raise ValueError(f"coordinate names are not distinct: {coords}")
    parser = _Parser(source, coords)
    expr = parser.expression(0)
    kind, value, pos = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected token '{value}'", pos)
    return expr


# ----------------------------------------------------------- pretty printer

def _format_number(v: float) -> str:
    if v == int(v) and abs(v) <= 1e15:
        return str(int(v))
    return repr(v)


def _render(e: Expr) -> tuple[str, int]:
    """Return (text, precedence) where precedence drives parenthesisation."""
    match e:
        case Lit(v):
            if v < 0:  # canonical form is Neg(Lit(|v|))
                return _render(Neg(Lit(-v)))
            return _format_number(v), 100
        case Var(_, name):
            return name, 100
        case Call(fn, arg):
            return f"{fn}({_render(arg)[0]})", 100
        case Neg(arg):
            return "-" + _wrap(arg, _PREC_POW), _PREC_NEG
        case Add(l, r):
            return f"{_wrap(l, 10)} + {_wrap(r, 11)}", 10
        case Sub(l, r):
            return f"{_wrap(l, 10)} - {_wrap(r, 11)}", 10
        case Mul(l, r):
            return f"{_wrap(l, 20)}*{_wrap(r, 21)}", 20
        case Div(l, r):
            return f"{_wrap(l, 20)}/{_wrap(r, 21)}", 20
        case Pow(l, r):
            return f"{_wrap(l, 31)}^{_wrap(r, 30)}", 30
    raise TypeError(f"not an expression node: {e!r}")


def _wrap(e: Expr, min_prec: int) -> str:
    text, prec = _render(e)
    return f"({text})" if prec < min_prec else text


def pretty(e: Expr) -> str:
    return _render(e)[0]


def free_variables(e: Expr) -> set[int]:
    match e:
        case Lit(_):
            return set()
        case Var(idx, _):
            return {idx}
        case Neg(arg) | Call(_, arg):
            return free_variables(arg)
        case Add(l, r) | Sub(l, r) | Mul(l, r) | Div(l, r) | Pow(l, r):
            return free_variables(l) | free_variables(r)
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------- differentiation

def _fold_add(l: Expr, r: Expr) -> Expr:
    if l == Lit(0.0):
        return r
    if r == Lit(0.0):
        return l
    return Add(l, r)


def _fold_sub(l: Expr, r: Expr) -> Expr:
    if r == Lit(0.0):
        return l
    if l == Lit(0.0):
        return Neg(r)
    return Sub(l, r)


def _fold_mul(l: Expr, r: Expr) -> Expr:
    if l == Lit(0.0) or r == Lit(0.0):
        return Lit(0.0)
    if l == Lit(1.0):
        return r
    if r == Lit(1.0):
        return l
    return Mul(l, r)


def differentiate(e: Expr, axis: int) -> Expr:
    """Exact partial derivative d/dx_axis as a new expression.

    Only trivial 0/1 constant folds are applied; no general simplification.
    """
    match e:
        case Lit(_):
            return Lit(0.0)
        case Var(idx, _):
            return Lit(1.0 if idx == axis else 0.0)
        case Neg(a):
            d = differentiate(a, axis)
            return Lit(0.0) if d == Lit(0.0) else Neg(d)
        case Add(l, r):
            return _fold_add(differentiate(l, axis), differentiate(r, axis))
        case Sub(l, r):
            return _fold_sub(differentiate(l, axis), differentiate(r, axis))
        case Mul(l, r):
            return _fold_add(
                _fold_mul(differentiate(l, axis), r),
                _fold_mul(l, differentiate(r, axis)),
            )
        case Div(l, r):
            num = _fold_sub(
                _fold_mul(differentiate(l, axis), r),
                _fold_mul(l, differentiate(r, axis)),
            )
            return Lit(0.0) if num == Lit(0.0) else Div(num, Pow(r, Lit(2.0)))
        case Pow(b, x):
            n = _integral_exponent(x)
            db = differentiate(b, axis)
            if n is not None:
                if n == 0 or db == Lit(0.0):
                    return Lit(0.0)
                return _fold_mul(Lit(float(n)), _fold_mul(Pow(b, Lit(float(n - 1))), db))
            dx = differentiate(x, axis)
            term = _fold_add(
                _fold_mul(dx, Call("log", b)), _fold_mul(x, Div(db, b))
            )
            return _fold_mul(e, term)
        case Call(fn, a):
            da = differentiate(a, axis)
            if da == Lit(0.0):
                return Lit(0.0)
            outer: Expr
            if fn == "sin":
                outer = Call("cos", a)
            elif fn == "cos":
                outer = Neg(Call("sin", a))
            elif fn == "tan":
                outer = Div(Lit(1.0), Pow(Call("cos", a), Lit(2.0)))
            elif fn == "exp":
                outer = Call("exp", a)
            elif fn == "log":
                outer = Div(Lit(1.0), a)
            elif fn == "sqrt":
                outer = Div(Lit(1.0), Mul(Lit(2.0), Call("sqrt", a)))
            elif fn == "sinh":
                outer = Call("cosh", a)
            elif fn == "cosh":
                outer = Call("sinh", a)
            elif fn == "tanh":
                outer = Div(Lit(1.0), Pow(Call("cosh", a), Lit(2.0)))
            elif fn == "atan":
                outer = Div(Lit(1.0), Add(Lit(1.0), Pow(a, Lit(2.0))))
            else:  # pragma: no cover
                raise DomainError(f"no derivative rule for '{fn}'")
            return _fold_mul(outer, da)
    raise TypeError(f"not an expression node: {e!r}")


# -------------------------------------------------------------- evaluation

def _integral_exponent(e: Expr) -> int | None:
    if isinstance(e, Lit) and float(e.value).is_integer() and abs(e.value) <= 2**31:
        return int(e.value)
    if isinstance(e, Neg):
        inner = _integral_exponent(e.arg)
        return None if inner is None else -inner
    return None


def evaluate(e: Expr, point) -> np.ndarray:
    """Plain pointwise evaluation; ``point`` has shape (..., ncoords)."""
    point = np.asarray(point, dtype=float)

    def rec(node: Expr):
        match node:
            case Lit(v):
                return np.full(point.shape[:-1], v)
            case Var(idx, _):
                return point[..., idx]
            case Neg(arg):
                return -rec(arg)
            case Add(l, r):
                return rec(l) + rec(r)
            case Sub(l, r):
                return rec(l) - rec(r)
            case Mul(l, r):
                return rec(l) * rec(r)
            case Div(l, r):
                with np.errstate(divide="ignore", invalid="ignore"):
                    return rec(l) / rec(r)
            case Pow(l, r):
                n = _integral_exponent(r)
                with np.errstate(all="ignore"):
                    if n is not None:
                        return rec(l) ** n
                    return np.exp(rec(r) * np.log(rec(l)))
            case Call(fn, arg):
                with np.errstate(all="ignore"):
                    return _NUMPY_FN[fn](rec(arg))
        raise TypeError(f"not an expression node: {node!r}")

    return rec(e)


def eval_jet(e: Expr, base_point, order: int, strict: bool = True) -> Jet:
    """Degree-``order`` Taylor jet of the expression at ``base_point``.

    Exact arithmetic on truncated series; no finite differencing.  The base
    point's last axis is the coordinate dimension, leading axes batch.
    """
    base_point = np.asarray(base_point, dtype=float)
    dim = base_point.shape[-1]

    def rec(node: Expr) -> Jet:
        match node:
            case Lit(v):
                return jet_constant(dim, order, np.full(base_point.shape[:-1], v))
            case Var(idx, name):
                if idx >= dim:
                    raise DomainError(
                        f"variable '{name}' (index {idx}) exceeds point dimension {dim}"
                    )
                return jet_variable(dim, order, idx, base_point[..., idx])
            case Neg(arg):
                return -rec(arg)
            case Add(l, r):
                return rec(l) + rec(r)
            case Sub(l, r):
                return rec(l) - rec(r)
            case Mul(l, r):
                return jet_mul(rec(l), rec(r))
            case Div(l, r):
                return jet_mul(rec(l), jet_compose("reciprocal", rec(r), strict))
            case Pow(l, r):
                n = _integral_exponent(r)
                if n is not None:
                    return jet_pow_int(rec(l), n)
                # non-integer exponent lowers to exp(r * log(l))
                log_l = jet_compose("log", rec(l), strict)
                return jet_compose("exp", jet_mul(rec(r), log_l), strict)
            case Call(fn, arg):
                return jet_compose(fn, rec(arg), strict)
        raise TypeError(f"not an expression node: {node!r}")

    return rec(e)
