"""Symbolic scalar fields on a coordinate chart.

A deliberately small expression layer: trees over coordinates, named real
parameters and opaque function jets, closed under differentiation, with a
canonical printer/parser pair and a randomized jet-evaluation equality test.

Equality of expressions is decided numerically: both sides are evaluated at
random chart points with the jets f, f', f'', ... of each opaque function
treated as independent random reals.  Every identity this package cares
about is rational-trigonometric in finitely many jet variables, so agreement
on a modest random sample decides equality with overwhelming probability
(Schwartz-Zippel style).  Canonical simplification exists only for printing
and fingerprinting, never as the equality oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Chart",
    "DomainError",
    "Expr",
    "ParseError",
    "SampleSpec",
    "UnknownSymbolError",
    "add",
    "canonicalize",
    "coord",
    "cos",
    "diff",
    "equiv",
    "equiv_many",
    "eval_jet",
    "exp",
    "jet",
    "mul",
    "num",
    "param",
    "parse",
    "pow_",
    "sin",
    "to_expr",
    "to_string",
    "max_violation",
    "sample_values",
    "jets_in",
]

# Node kinds.
NUM = 0
COORD = 1
PARAM = 2
JET = 3
ADD = 4
MUL = 5
POW = 6
SIN = 7
COS = 8
EXP = 9

_FUN_KINDS = (SIN, COS, EXP)
_FUN_NAMES = {SIN: "sin", COS: "cos", EXP: "exp"}


class DomainError(ValueError):
    """Evaluation hit a pole, overflow or an undefined power."""


class ParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class UnknownSymbolError(ParseError):
    def __init__(self, name: str, pos: int):
        super().__init__(f"unknown symbol '{name}'", pos)
        self.name = name


class Expr:
    """Immutable expression node; build through the module constructors."""

    __slots__ = ("kind", "data", "args", "_hash", "_key")

    def __init__(self, kind: int, data, args: tuple) -> None:
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "_hash", hash((kind, data, args)))
        object.__setattr__(self, "_key", None)

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("Expr is immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        return (
            self._hash == other._hash
            and self.kind == other.kind
            and self.data == other.data
            and self.args == other.args
        )

    # Deterministic total order used for canonical argument sorting.
    def sort_key(self):
        k = self._key
        if k is None:
            if self.kind == NUM:
                payload = (self.data.numerator, self.data.denominator)
            elif self.kind == POW:
                payload = (self.data.numerator, self.data.denominator)
            elif self.kind == JET:
                payload = self.data
            else:
                payload = self.data if self.data is not None else ()
            k = (self.kind, payload, tuple(a.sort_key() for a in self.args))
            object.__setattr__(self, "_key", k)
        return k

    # Arithmetic sugar so tensor code reads like math.
    def __add__(self, other):
        return add(self, to_expr(other))

    def __radd__(self, other):
        return add(to_expr(other), self)

    def __sub__(self, other):
        return add(self, mul(_MINUS_ONE, to_expr(other)))

    def __rsub__(self, other):
        return add(to_expr(other), mul(_MINUS_ONE, self))

    def __mul__(self, other):
        return mul(self, to_expr(other))

    def __rmul__(self, other):
        return mul(to_expr(other), self)

    def __truediv__(self, other):
        return mul(self, pow_(to_expr(other), -1))

    def __rtruediv__(self, other):
        return mul(to_expr(other), pow_(self, -1))

    def __neg__(self):
        return mul(_MINUS_ONE, self)

    def __pow__(self, q):
        return pow_(self, q)

    def is_zero(self) -> bool:
        return self.kind == NUM and self.data == 0

    def __str__(self) -> str:
        return to_string(self)

    def __repr__(self) -> str:
        return f"Expr({to_string(self)})"


def num(value) -> Expr:
    return Expr(NUM, Fraction(value), ())


ZERO = num(0)
ONE = num(1)
_MINUS_ONE = num(-1)


def to_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return num(x)
    raise TypeError(f"cannot coerce {x!r} to Expr")


def coord(name: str) -> Expr:
    return Expr(COORD, name, ())


def param(name: str) -> Expr:
    return Expr(PARAM, name, ())


def jet(name: str, order: int, arg: str) -> Expr:
    return Expr(JET, (name, order, arg), ())


def _term_parts(e: Expr) -> tuple[Fraction, Expr]:
    """Split a term into (rational coefficient, monomial)."""
    if e.kind == NUM:
        return e.data, ONE
    if e.kind == MUL:
        if e.data == 1:
            return Fraction(1), e
        mono = e.args[0] if len(e.args) == 1 else Expr(MUL, Fraction(1), e.args)
        return e.data, mono
    return Fraction(1), e


def add(*terms) -> Expr:
    acc: dict[Expr, Fraction] = {}
    const = Fraction(0)
    for t in terms:
        inner = t.args if t.kind == ADD else (t,)
        for e in inner:
            if e.kind == NUM:
                const += e.data
                continue
            c, mono = _term_parts(e)
            acc[mono] = acc.get(mono, Fraction(0)) + c
    out = []
    for mono, c in acc.items():
        if c == 0:
            continue
        if mono is ONE or mono == ONE:
            const += c
            continue
        out.append(_scale(mono, c))
    if const != 0:
        out.append(num(const))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    out.sort(key=Expr.sort_key)
    return Expr(ADD, None, tuple(out))


def _scale(mono: Expr, c: Fraction) -> Expr:
    if c == 1:
        return mono
    if mono.kind == MUL:
        coeff = mono.data * c
        if coeff == 0:
            return ZERO
        return Expr(MUL, coeff, mono.args)
    return Expr(MUL, c, (mono,))


def mul(*factors) -> Expr:
    coeff = Fraction(1)
    bases: dict[Expr, Fraction] = {}
    order: list[Expr] = []

    def feed(e: Expr, outer: Fraction):
        nonlocal coeff
        if e.kind == NUM:
            try:
                coeff *= _rat_pow(e.data, outer)
            except _InexactRoot:
                if e not in bases:
                    order.append(e)
                    bases[e] = Fraction(0)
                bases[e] += outer
            return
        if e.kind == MUL:
            if e.data != 1:
                feed(num(e.data), outer)
            for a in e.args:
                feed(a, outer)
            return
        if e.kind == POW:
            feed(e.args[0], outer * e.data)
            return
        if e not in bases:
            order.append(e)
            bases[e] = Fraction(0)
        bases[e] += outer

    for f in factors:
        if f.kind == NUM and f.data == 0:
            return ZERO
        feed(f, Fraction(1))
    if coeff == 0:
        return ZERO

    parts = []
    for b in order:
        q = bases[b]
        if q == 0:
            continue
        parts.append(b if q == 1 else Expr(POW, q, (b,)))
    if not parts:
        return num(coeff)
    parts.sort(key=Expr.sort_key)
    if len(parts) == 1 and coeff == 1:
        return parts[0]
    if len(parts) == 1 and parts[0].kind == ADD:
        # distribute rational scalings over sums so that like terms cancel
        return add(*( _scale_term(t, coeff) for t in parts[0].args))
    return Expr(MUL, coeff, tuple(parts))


def _scale_term(t: Expr, c: Fraction) -> Expr:
    if t.kind == NUM:
        return num(t.data * c)
    if t.kind == MUL:
        return Expr(MUL, t.data * c, t.args)
    return Expr(MUL, c, (t,))


def _rat_pow(base: Fraction, q: Fraction) -> Fraction:
    """Exact power of a rational; raises _InexactRoot when it cannot fold."""
    if q.denominator == 1:
        if base == 0 and q < 0:
            raise DomainError("0 raised to a negative power")
        return base**q.numerator
    if base < 0:
        raise _InexactRoot()

    def iroot(n: int, k: int) -> int | None:
        r = round(n ** (1.0 / k))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand**k == n:
                return cand
        return None

    pn = iroot(base.numerator, q.denominator)
    pd = iroot(base.denominator, q.denominator)
    if pn is None or pd is None:
        raise _InexactRoot()
    return Fraction(pn, pd) ** q.numerator


class _InexactRoot(Exception):
    pass


def pow_(base: Expr, q) -> Expr:
    q = Fraction(q) if not isinstance(q, Fraction) else q
    if isinstance(q, Expr):  # pragma: no cover
        raise TypeError("exponent must be rational")
    if q == 0:
        return ONE
    if q == 1:
        return base
    if base.kind == NUM:
        try:
            return num(_rat_pow(base.data, q))
        except _InexactRoot:
            return Expr(POW, q, (base,))
    if base.kind == POW:
        return pow_(base.args[0], base.data * q)
    if base.kind == MUL and q.denominator == 1:
        return mul(pow_(num(base.data), q), *(pow_(a, q) for a in base.args))
    return Expr(POW, q, (base,))


def sin(u: Expr) -> Expr:
    if u.is_zero():
        return ZERO
    return Expr(SIN, None, (u,))


def cos(u: Expr) -> Expr:
    if u.is_zero():
        return ONE
    return Expr(COS, None, (u,))


def exp(u: Expr) -> Expr:
    if u.is_zero():
        return ONE
    return Expr(EXP, None, (u,))


# ---------------------------------------------------------------------------
# Differentiation

_diff_cache: dict[tuple[Expr, str], Expr] = {}


def diff(e: Expr, x: str) -> Expr:
    """Exact partial derivative with respect to the coordinate x."""
    key = (e, x)
    hit = _diff_cache.get(key)
    if hit is not None:
        return hit
    k = e.kind
    if k in (NUM, PARAM):
        out = ZERO
    elif k == COORD:
        out = ONE if e.data == x else ZERO
    elif k == JET:
        name, order, arg = e.data
        out = jet(name, order + 1, arg) if arg == x else ZERO
    elif k == ADD:
        out = add(*(diff(a, x) for a in e.args))
    elif k == MUL:
        terms = []
        for i, a in enumerate(e.args):
            da = diff(a, x)
            if da.is_zero():
                continue
            rest = e.args[:i] + e.args[i + 1 :]
            terms.append(mul(num(e.data), da, *rest))
        out = add(*terms) if terms else ZERO
    elif k == POW:
        u = e.args[0]
        du = diff(u, x)
        out = ZERO if du.is_zero() else mul(num(e.data), pow_(u, e.data - 1), du)
    elif k == SIN:
        out = mul(cos(e.args[0]), diff(e.args[0], x))
    elif k == COS:
        out = mul(_MINUS_ONE, sin(e.args[0]), diff(e.args[0], x))
    elif k == EXP:
        out = mul(e, diff(e.args[0], x))
    else:  # pragma: no cover
        raise AssertionError(k)
    _diff_cache[key] = out
    return out


# ---------------------------------------------------------------------------
# Canonical form (printing / fingerprinting only)


def canonicalize(e: Expr) -> Expr:
    """Expand, collect like terms and rewrite sin^2 -> 1 - cos^2.

    Deterministic and idempotent; used for display and regression hashes,
    never as the equality test.
    """
    return _expand(_rewrite(e))


def _rewrite(e: Expr) -> Expr:
    k = e.kind
    if k in (NUM, COORD, PARAM, JET):
        return e
    if k == ADD:
        return add(*(_rewrite(a) for a in e.args))
    if k == MUL:
        return _rewrite_sin2(mul(num(e.data), *(_rewrite(a) for a in e.args)))
    if k == POW:
        return _rewrite_sin2(pow_(_rewrite(e.args[0]), e.data))
    if k == SIN:
        return sin(_rewrite(e.args[0]))
    if k == COS:
        return cos(_rewrite(e.args[0]))
    if k == EXP:
        return exp(_rewrite(e.args[0]))
    raise AssertionError(k)  # pragma: no cover


_EXPAND_POW_LIMIT = 6


def _expand(e: Expr) -> Expr:
    """Distribute products (and small integer powers) over sums."""
    k = e.kind
    if k in (NUM, COORD, PARAM, JET, SIN, COS, EXP):
        return e
    if k == ADD:
        return add(*(_expand(a) for a in e.args))
    if k == POW:
        base = _expand(e.args[0])
        q: Fraction = e.data
        if base.kind == ADD and q.denominator == 1 and 2 <= q <= _EXPAND_POW_LIMIT:
            terms = [ONE]
            for _ in range(q.numerator):
                terms = [mul(t, s) for t in terms for s in base.args]
            return add(*terms)
        return pow_(base, q)
    if k == MUL:
        terms = [num(e.data)]
        for a in e.args:
            fa = _expand(a)
            summands = fa.args if fa.kind == ADD else (fa,)
            terms = [mul(t, s) for t in terms for s in summands]
        return add(*terms)
    raise AssertionError(k)  # pragma: no cover


def _rewrite_sin2(e: Expr) -> Expr:
    """Apply sin(u)^n -> (1 - cos(u)^2)^(n//2) * sin(u)^(n%2) for integer n >= 2."""
    if e.kind == POW and e.args[0].kind == SIN and e.data.denominator == 1 and e.data >= 2:
        u = e.args[0].args[0]
        n = e.data.numerator
        even = add(ONE, mul(_MINUS_ONE, pow_(cos(u), 2)))
        out = pow_(even, n // 2)
        if n % 2:
            out = mul(out, sin(u))
        return out
    if e.kind == MUL:
        changed = False
        parts = []
        for a in e.args:
            r = _rewrite_sin2(a)
            changed = changed or (r is not a)
            parts.append(r)
        if changed:
            return mul(num(e.data), *parts)
    return e


# ---------------------------------------------------------------------------
# Printer

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def to_string(e: Expr) -> str:
    return _print(e, 0)


def _print(e: Expr, ctx: int) -> str:
    k = e.kind
    if k == NUM:
        f: Fraction = e.data
        if f.denominator == 1:
            s = str(f.numerator)
            level = _PREC_ATOM if f >= 0 else _PREC_NEG
        else:
            s = f"{f.numerator}/{f.denominator}"
            level = _PREC_MUL if f >= 0 else _PREC_NEG
        return _wrap(s, level, ctx)
    if k in (COORD, PARAM):
        return e.data
    if k == JET:
        name, order, arg = e.data
        primes = "'" * order
        return f"{name}{primes}({arg})"
    if k == ADD:
        out = _print(e.args[0], _PREC_ADD)
        for a in e.args[1:]:
            c, _ = _term_parts(a)
            if c < 0:
                out += " - " + _print(_negate_term(a), _PREC_ADD + 1)
            else:
                out += " + " + _print(a, _PREC_ADD + 1)
        return _wrap(out, _PREC_ADD, ctx)
    if k == MUL:
        sign = "-" if e.data < 0 else ""
        mag = -e.data if e.data < 0 else e.data
        parts = [] if mag == 1 else [_print(num(mag), _PREC_MUL + 1)]
        parts.extend(_print(a, _PREC_MUL + 1) for a in e.args)
        s = sign + "*".join(parts)
        return _wrap(s, _PREC_NEG if sign else _PREC_MUL, ctx)
    if k == POW:
        base = _print(e.args[0], _PREC_POW + 1)
        q: Fraction = e.data
        es = str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
        if q < 0 or q.denominator != 1:
            es = f"({es})"
        return _wrap(f"{base}^{es}", _PREC_POW, ctx)
    if k in _FUN_KINDS:
        return f"{_FUN_NAMES[k]}({_print(e.args[0], 0)})"
    raise AssertionError(k)  # pragma: no cover


def _negate_term(e: Expr) -> Expr:
    if e.kind == NUM:
        return num(-e.data)
    if e.kind == MUL:
        mono = e.args[0] if len(e.args) == 1 else Expr(MUL, Fraction(1), e.args)
        return _scale(mono, -e.data)
    return _scale(e, Fraction(-1))


def _wrap(s: str, level: int, ctx: int) -> str:
    return f"({s})" if level < ctx else s


# ---------------------------------------------------------------------------
# Chart


@dataclass(frozen=True)
class Chart:
    """Coordinate chart: ordered coordinates, real parameters, opaque functions.

    Each opaque function depends on exactly one declared coordinate; its
    formal derivatives enter expressions as independent jet symbols.
    """

    coords: tuple[str, ...]
    params: tuple[str, ...] = ()
    opaque_fns: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        names = list(self.coords) + list(self.params) + [n for n, _ in self.opaque_fns]
        if len(set(names)) != len(names):
            raise ValueError("coordinate, parameter and function names must be distinct")
        for fn, arg in self.opaque_fns:
            if arg not in self.coords:
                raise ValueError(f"opaque function {fn} depends on unknown coordinate {arg}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def fn_arg(self, name: str) -> str:
        for fn, arg in self.opaque_fns:
            if fn == name:
                return arg
        raise KeyError(name)

    def coordinate_exprs(self) -> tuple[Expr, ...]:
        return tuple(coord(c) for c in self.coords)


# ---------------------------------------------------------------------------
# Parser

_HEADS = ("sin", "cos", "exp")
_SUGAR = ("sqrt", "csc", "sec", "cot")


def parse(text: str, chart: Chart) -> Expr:
    """Parse an expression over the chart's declared names.

    Grammar: + - * / ^ with the usual precedence, unary minus, integer and
    decimal literals, function application f(x) and derivative primes f'(x).
    csc/sec/cot/sqrt are expanded into the core sin/cos/power grammar.
    """
    p = _Parser(text, chart)
    e = p.parse_expr()
    p.skip_ws()
    if p.pos != len(text):
        raise ParseError(f"unexpected character {text[p.pos]!r}", p.pos)
    return e


class _Parser:
    def __init__(self, text: str, chart: Chart):
        self.text = text
        self.chart = chart
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            raise ParseError(f"expected {ch!r}", self.pos)
        self.pos += 1

    def parse_expr(self) -> Expr:
        e = self.parse_term()
        while True:
            c = self.peek()
            if c == "+":
                self.pos += 1
                e = add(e, self.parse_term())
            elif c == "-":
                self.pos += 1
                e = add(e, mul(_MINUS_ONE, self.parse_term()))
            else:
                return e

    def parse_term(self) -> Expr:
        e = self.parse_unary()
        while True:
            c = self.peek()
            if c == "*":
                self.pos += 1
                e = mul(e, self.parse_unary())
            elif c == "/":
                self.pos += 1
                e = mul(e, pow_(self.parse_unary(), -1))
            else:
                return e

    def parse_unary(self) -> Expr:
        if self.peek() == "-":
            self.pos += 1
            return mul(_MINUS_ONE, self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek() == "^":
            self.pos += 1
            expo = self.parse_unary()  # right-associative
            if expo.kind != NUM:
                raise ParseError("exponent must be a rational constant", self.pos)
            return pow_(base, expo.data)
        return base

    def parse_atom(self) -> Expr:
        self.skip_ws()
        if self.pos >= len(self.text):
            raise ParseError("unexpected end of input", self.pos)
        c = self.text[self.pos]
        if c == "(":
            self.pos += 1
            e = self.parse_expr()
            self.skip_ws()
            if self.peek() != ")":
                raise ParseError("unbalanced parenthesis", self.pos)
            self.pos += 1
            return e
        if c.isdigit() or c == ".":
            return self.parse_number()
        if c.isalpha() or c == "_":
            return self.parse_name()
        raise ParseError(f"unexpected character {c!r}", self.pos)

    def parse_number(self) -> Expr:
        start = self.pos
        seen_dot = False
        while self.pos < len(self.text) and (self.text[self.pos].isdigit() or self.text[self.pos] == "."):
            if self.text[self.pos] == ".":
                if seen_dot:
                    raise ParseError("malformed number", self.pos)
                seen_dot = True
            self.pos += 1
        try:
            return num(Fraction(self.text[start : self.pos]))
        except ValueError:
            raise ParseError("malformed number", start) from None

    def parse_name(self) -> Expr:
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        name = self.text[start : self.pos]
        primes = 0
        while self.pos < len(self.text) and self.text[self.pos] == "'":
            primes += 1
            self.pos += 1

        fn_names = tuple(n for n, _ in self.chart.opaque_fns)
        if name in fn_names:
            if self.peek() != "(":
                raise ParseError(f"opaque function {name} must be applied", self.pos)
            self.pos += 1
            inner = self.parse_expr()
            self.expect(")")
            arg = self.chart.fn_arg(name)
            if inner != coord(arg):
                raise ParseError(f"{name} must be applied to its coordinate {arg}", start)
            return jet(name, primes, arg)
        if primes:
            raise ParseError(f"prime marks only apply to opaque functions, got {name}", start)
        if name in _HEADS or name in _SUGAR:
            self.expect("(")
            inner = self.parse_expr()
            self.expect(")")
            if name == "sin":
                return sin(inner)
            if name == "cos":
                return cos(inner)
            if name == "exp":
                return exp(inner)
            if name == "sqrt":
                return pow_(inner, Fraction(1, 2))
            if name == "csc":
                return pow_(sin(inner), -1)
            if name == "sec":
                return pow_(cos(inner), -1)
            return mul(cos(inner), pow_(sin(inner), -1))  # cot
        if name in self.chart.coords:
            return coord(name)
        if name in self.chart.params:
            return param(name)
        raise UnknownSymbolError(name, start)


# ---------------------------------------------------------------------------
# Evaluation


def jets_in(exprs: Iterable[Expr]) -> dict[str, int]:
    """Maximum derivative order used per opaque function across the expressions."""
    seen: dict[str, int] = {}
    stack = list(exprs)
    visited: set[int] = set()
    while stack:
        e = stack.pop()
        if id(e) in visited:
            continue
        visited.add(id(e))
        if e.kind == JET:
            name, order, _ = e.data
            seen[name] = max(seen.get(name, 0), order)
        stack.extend(e.args)
    return seen


_HUGE = 1e12


def eval_batch(e: Expr, env: Mapping[str, np.ndarray], jets: Mapping[tuple[str, int], np.ndarray], memo: dict) -> np.ndarray:
    """Evaluate e at a batch of points; env maps coordinate/parameter names to arrays."""
    out = memo.get(id(e))
    if out is not None:
        return out
    k = e.kind
    if k == NUM:
        out = np.float64(e.data)
    elif k in (COORD, PARAM):
        out = env[e.data]
    elif k == JET:
        name, order, _ = e.data
        out = jets[(name, order)]
    elif k == ADD:
        out = eval_batch(e.args[0], env, jets, memo)
        for a in e.args[1:]:
            out = out + eval_batch(a, env, jets, memo)
    elif k == MUL:
        out = np.float64(e.data)
        for a in e.args:
            out = out * eval_batch(a, env, jets, memo)
    elif k == POW:
        base = eval_batch(e.args[0], env, jets, memo)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.power(np.asarray(base, dtype=np.float64), float(e.data))
    elif k == SIN:
        out = np.sin(eval_batch(e.args[0], env, jets, memo))
    elif k == COS:
        out = np.cos(eval_batch(e.args[0], env, jets, memo))
    elif k == EXP:
        with np.errstate(over="ignore"):
            out = np.exp(eval_batch(e.args[0], env, jets, memo))
    else:  # pragma: no cover
        raise AssertionError(k)
    memo[id(e)] = out
    return out


def eval_jet(
    e: Expr,
    point: Mapping[str, float],
    jets: Mapping[tuple[str, int], float] | None = None,
    params: Mapping[str, float] | None = None,
) -> float:
    """Evaluate at one point; opaque jets of distinct orders are independent reals."""
    env = {k: np.float64(v) for k, v in point.items()}
    if params:
        env.update({k: np.float64(v) for k, v in params.items()})
    jarr = {k: np.float64(v) for k, v in (jets or {}).items()}
    value = eval_batch(e, env, jarr, {})
    v = float(value)
    if not np.isfinite(v) or abs(v) > _HUGE:
        raise DomainError(f"expression {to_string(e)} is singular at the given point")
    return v


# ---------------------------------------------------------------------------
# Randomized equality


@dataclass(frozen=True)
class SampleSpec:
    """Sampling domain and tolerances for the randomized equality test.

    box maps coordinate (or parameter) names to closed intervals chosen away
    from the geometry's singular loci; endpoints may be Exprs in previously
    listed parameters.  Jets are drawn with magnitude in jet_range and random
    sign, keeping them away from zero to dodge accidental cancellations.
    """

    box: Mapping[str, tuple] = field(default_factory=dict)
    n_samples: int = 20
    seeds: tuple[int, ...] = (1, 2, 3)
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    jet_range: tuple[float, float] = (0.5, 2.0)

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")

    def with_seeds(self, seeds: Sequence[int]) -> "SampleSpec":
        return SampleSpec(self.box, self.n_samples, tuple(seeds), self.rel_tol, self.abs_tol, self.jet_range)


_DEFAULT_RANGE = (0.5, 2.0)
_MAX_REDRAWS = 8


def _draw_env(chart: Chart, spec: SampleSpec, rng: np.random.Generator, n: int, jet_orders: Mapping[str, int]):
    env: dict[str, np.ndarray] = {}
    for p in chart.params:
        lo, hi = spec.box.get(p, _DEFAULT_RANGE)
        env[p] = rng.uniform(float(lo), float(hi), n)
    for c in chart.coords:
        lo, hi = spec.box.get(c, _DEFAULT_RANGE)
        lo_a = _bound_array(lo, env, n)
        hi_a = _bound_array(hi, env, n)
        env[c] = lo_a + (hi_a - lo_a) * rng.uniform(0.0, 1.0, n)
    jets: dict[tuple[str, int], np.ndarray] = {}
    jl, jh = spec.jet_range
    for name, max_order in jet_orders.items():
        for order in range(max_order + 1):
            mag = rng.uniform(jl, jh, n)
            sign = np.where(rng.uniform(0.0, 1.0, n) < 0.5, -1.0, 1.0)
            jets[(name, order)] = mag * sign
    return env, jets


def _bound_array(bound, env: Mapping[str, np.ndarray], n: int) -> np.ndarray:
    if isinstance(bound, Expr):
        return np.asarray(eval_batch(bound, env, {}, {}), dtype=np.float64) * np.ones(n)
    return np.full(n, float(bound))


def equiv(a: Expr, b: Expr, spec: SampleSpec, chart: Chart) -> bool:
    """True iff a and b agree numerically at every sampled point, all seeds."""
    return equiv_many([(a, b)], spec, chart)


def equiv_many(pairs: Sequence[tuple[Expr, Expr]], spec: SampleSpec, chart: Chart) -> bool:
    """Joint equality test for many expression pairs over shared sample draws.

    All expressions are evaluated against the same batch through one memo
    table, so shared subtrees (metrics, Christoffel symbols, curvatures)
    are computed once per point.
    """
    return max_violation(pairs, spec, chart) <= 0.0


def max_violation(pairs: Sequence[tuple[Expr, Expr]], spec: SampleSpec, chart: Chart) -> float:
    """Largest tolerance excess over all pairs/samples; <= 0 means equivalent."""
    exprs = [e for p in pairs for e in p]
    jet_orders = jets_in(exprs)
    worst = -np.inf
    for seed in spec.seeds:
        rng = np.random.default_rng(seed)
        got = 0
        redraws = 0
        while got < spec.n_samples:
            n = spec.n_samples - got
            env, jets = _draw_env(chart, spec, rng, n, jet_orders)
            memo: dict = {}
            va = np.empty((len(pairs), n))
            vb = np.empty((len(pairs), n))
            for i, (a, b) in enumerate(pairs):
                va[i] = eval_batch(a, env, jets, memo)
                vb[i] = eval_batch(b, env, jets, memo)
            ok = np.isfinite(va).all(axis=0) & np.isfinite(vb).all(axis=0)
            ok &= (np.abs(va) < _HUGE).all(axis=0) & (np.abs(vb) < _HUGE).all(axis=0)
            if not ok.any():
                redraws += 1
                if redraws > _MAX_REDRAWS:
                    raise DomainError("could not sample: every draw hit a singular point")
                continue
            va, vb = va[:, ok], vb[:, ok]
            excess = np.abs(va - vb) - (spec.abs_tol + spec.rel_tol * np.maximum(np.abs(va), np.abs(vb)))
            worst = max(worst, float(excess.max()))
            got += int(ok.sum())
            if not ok.all():
                redraws += 1
                if redraws > _MAX_REDRAWS:
                    raise DomainError("could not sample: too many singular draws")
    return worst


def sample_values(exprs: Sequence[Expr], spec: SampleSpec, chart: Chart, seed: int) -> np.ndarray:
    """Deterministic value table (len(exprs) x n_samples) used for fingerprints."""
    jet_orders = jets_in(exprs)
    rng = np.random.default_rng(seed)
    for _ in range(_MAX_REDRAWS):
        env, jets = _draw_env(chart, spec, rng, spec.n_samples, jet_orders)
        memo: dict = {}
        vals = np.stack([eval_batch(e, env, jets, memo) for e in exprs]) if exprs else np.zeros((0, spec.n_samples))
        if np.isfinite(vals).all() and (np.abs(vals) < _HUGE).all():
            return vals
    raise DomainError("could not sample: too many singular draws")
