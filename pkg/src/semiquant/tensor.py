"""Dense coordinate tensors, differential forms and first-order pairs.

Components are Expr-valued and stored flat, one slot per index with an
explicit variance sign (+1 contravariant, -1 covariant), so raising or
lowering never reshuffles index positions.  Dimensions are at most 4, so
dense storage and Laplace-expansion inverses are entirely adequate.

Differential forms are kept in the standard alternating convention
xi = (1/k!) xi_{i1..ik} dx^{i1} ^ .. ^ dx^{ik}.  The literature this package
reproduces writes a 2-form as (1/2) xi_{nm} dx^m ^ dx^n instead; the two
component conventions differ by a transpose, and every translation goes
through two_form_components / two_form_from_components so the sign lives in
exactly one place.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .expr import Chart, Expr, ZERO, add, diff, mul, num, pow_, to_expr

__all__ = [
    "DiffForm",
    "FirstOrder",
    "TensorField",
    "basis_one_form",
    "build",
    "classical",
    "conjugate_pair",
    "contract",
    "ext_d",
    "form_from_bilinear",
    "interior",
    "inverse_matrix",
    "lift_two_form",
    "lower_slot",
    "matrix_determinant",
    "one_form",
    "raise_slot",
    "scale",
    "scale_form",
    "scalar_form",
    "swap_slots",
    "tensor_product",
    "two_form_components",
    "two_form_from_components",
    "wedge",
    "zero_form",
    "zeros",
]


def _indices(dim: int, rank: int):
    return itertools.product(range(dim), repeat=rank)


def _offset(idx: tuple[int, ...], dim: int) -> int:
    o = 0
    for i in idx:
        o = o * dim + i
    return o


@dataclass(frozen=True)
class TensorField:
    """Rank-(up,down) tensor with Expr components, one variance sign per slot."""

    chart: Chart
    variance: tuple[int, ...]
    comps: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.comps) != self.chart.dim ** len(self.variance):
            raise ValueError("component count does not match rank")

    @property
    def rank(self) -> int:
        return len(self.variance)

    @property
    def up(self) -> int:
        return sum(1 for v in self.variance if v > 0)

    @property
    def down(self) -> int:
        return sum(1 for v in self.variance if v < 0)

    def __getitem__(self, idx) -> Expr:
        if isinstance(idx, int):
            idx = (idx,)
        return self.comps[_offset(idx, self.chart.dim)]

    def __add__(self, other: "TensorField") -> "TensorField":
        self._check_same(other)
        return TensorField(self.chart, self.variance, tuple(a + b for a, b in zip(self.comps, other.comps)))

    def __sub__(self, other: "TensorField") -> "TensorField":
        self._check_same(other)
        return TensorField(self.chart, self.variance, tuple(a - b for a, b in zip(self.comps, other.comps)))

    def __neg__(self) -> "TensorField":
        return scale(self, -1)

    def _check_same(self, other: "TensorField"):
        if self.chart is not other.chart and self.chart != other.chart:
            raise ValueError("chart mismatch")
        if self.variance != other.variance:
            raise ValueError(f"variance mismatch {self.variance} vs {other.variance}")

    def is_syntactically_zero(self) -> bool:
        return all(c.is_zero() for c in self.comps)


def zeros(chart: Chart, variance: Sequence[int]) -> TensorField:
    n = chart.dim ** len(variance)
    return TensorField(chart, tuple(variance), (ZERO,) * n)


def build(chart: Chart, variance: Sequence[int], fn: Callable[..., Expr]) -> TensorField:
    dim = chart.dim
    comps = tuple(fn(*idx) for idx in _indices(dim, len(variance)))
    return TensorField(chart, tuple(variance), comps)


def scale(t: TensorField, c) -> TensorField:
    ce = to_expr(c) if not isinstance(c, Expr) else c
    return TensorField(t.chart, t.variance, tuple(mul(ce, x) for x in t.comps))


def tensor_product(a: TensorField, b: TensorField) -> TensorField:
    if a.chart != b.chart:
        raise ValueError("chart mismatch")
    var = a.variance + b.variance
    comps = tuple(mul(x, y) for x in a.comps for y in b.comps)
    return TensorField(a.chart, var, comps)


def contract(a: TensorField, up_slot: int, down_slot: int) -> TensorField:
    """Einstein sum pairing one contravariant slot against one covariant slot."""
    if not (0 <= up_slot < a.rank and 0 <= down_slot < a.rank) or up_slot == down_slot:
        raise ValueError("slot out of range")
    if a.variance[up_slot] <= 0 or a.variance[down_slot] >= 0:
        raise ValueError("contract needs one up and one down slot")
    dim = a.chart.dim
    keep = [s for s in range(a.rank) if s not in (up_slot, down_slot)]
    var = tuple(a.variance[s] for s in keep)

    def comp(*idx):
        full = [0] * a.rank
        for pos, s in enumerate(keep):
            full[s] = idx[pos]
        terms = []
        for m in range(dim):
            full[up_slot] = m
            full[down_slot] = m
            terms.append(a[tuple(full)])
        return add(*terms)

    return build(a.chart, var, comp)


def swap_slots(a: TensorField, s1: int, s2: int) -> TensorField:
    if a.variance[s1] != a.variance[s2]:
        raise ValueError("swap requires equal variance")

    def comp(*idx):
        j = list(idx)
        j[s1], j[s2] = j[s2], j[s1]
        return a[tuple(j)]

    return build(a.chart, a.variance, comp)


def lower_slot(a: TensorField, slot: int, g: TensorField) -> TensorField:
    """Lower one contravariant slot with the metric, keeping index order."""
    if a.variance[slot] <= 0:
        raise ValueError("slot is not contravariant")
    dim = a.chart.dim
    var = list(a.variance)
    var[slot] = -1

    def comp(*idx):
        full = list(idx)
        terms = []
        for d in range(dim):
            full[slot] = d
            terms.append(mul(g[(idx[slot], d)], a[tuple(full)]))
        return add(*terms)

    return build(a.chart, var, comp)


def raise_slot(a: TensorField, slot: int, ginv: TensorField) -> TensorField:
    """Raise one covariant slot with the inverse metric, keeping index order."""
    if a.variance[slot] >= 0:
        raise ValueError("slot is not covariant")
    dim = a.chart.dim
    var = list(a.variance)
    var[slot] = +1

    def comp(*idx):
        full = list(idx)
        terms = []
        for d in range(dim):
            full[slot] = d
            terms.append(mul(ginv[(idx[slot], d)], a[tuple(full)]))
        return add(*terms)

    return build(a.chart, var, comp)


# ---------------------------------------------------------------------------
# Symbolic matrix inverse (adjugate / determinant), for metrics and frames.


def matrix_determinant(m: Sequence[Sequence[Expr]]) -> Expr:
    n = len(m)
    if n == 1:
        return m[0][0]
    terms = []
    for j in range(n):
        minor = [row[:j] + row[j + 1 :] for row in [list(r) for r in m[1:]]]
        term = mul(m[0][j], matrix_determinant(minor))
        terms.append(term if j % 2 == 0 else mul(num(-1), term))
    return add(*terms)


def inverse_matrix(m: Sequence[Sequence[Expr]]) -> tuple[list[list[Expr]], Expr]:
    """Adjugate-over-determinant inverse; returns (inverse, determinant)."""
    n = len(m)
    rows = [list(r) for r in m]
    det = matrix_determinant(rows)
    inv_det = pow_(det, -1)
    out = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:i] + row[i + 1 :] for k, row in enumerate(rows) if k != j]
            cof = matrix_determinant(minor) if minor else num(1)
            if (i + j) % 2:
                cof = mul(num(-1), cof)
            out[i][j] = mul(cof, inv_det)
    return out, det


# ---------------------------------------------------------------------------
# Differential forms (standard alternating components).


@dataclass(frozen=True)
class DiffForm:
    """Degree-k form as a totally antisymmetric (0,k) tensor, 1/k! convention."""

    degree: int
    tensor: TensorField

    def __post_init__(self):
        if self.tensor.variance != (-1,) * self.degree:
            raise ValueError("form tensor must be fully covariant of matching degree")

    @property
    def chart(self) -> Chart:
        return self.tensor.chart

    def __getitem__(self, idx) -> Expr:
        return self.tensor[idx]

    def __add__(self, other: "DiffForm") -> "DiffForm":
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        return DiffForm(self.degree, self.tensor + other.tensor)

    def __sub__(self, other: "DiffForm") -> "DiffForm":
        return self + scale_form(other, -1)

    def __neg__(self) -> "DiffForm":
        return scale_form(self, -1)

    def is_syntactically_zero(self) -> bool:
        return self.tensor.is_syntactically_zero()


def scale_form(f: DiffForm, c) -> DiffForm:
    return DiffForm(f.degree, scale(f.tensor, c))


def zero_form(chart: Chart, degree: int) -> DiffForm:
    return DiffForm(degree, zeros(chart, (-1,) * degree))


def one_form(chart: Chart, comps: Sequence[Expr]) -> DiffForm:
    return DiffForm(1, TensorField(chart, (-1,), tuple(comps)))


def basis_one_form(chart: Chart, i: int) -> DiffForm:
    return one_form(chart, tuple(num(1 if j == i else 0) for j in range(chart.dim)))


def wedge(a: DiffForm, b: DiffForm) -> DiffForm:
    """Exterior product in the 1/k! component convention.

    Degrees past the chart dimension are permitted and collapse to the zero
    form; the covariant-closure checks wedge 1-forms against 2-forms on
    2-dimensional charts and rely on this.
    """
    p, q = a.degree, b.degree
    chart = a.chart
    if p == 0:
        return scale_form(b, a.tensor.comps[0] if a.tensor.comps else ZERO)
    if q == 0:
        return scale_form(a, b.tensor.comps[0] if b.tensor.comps else ZERO)
    shuffles = []
    for s in itertools.combinations(range(p + q), p):
        sign = (-1) ** (sum(s) - p * (p - 1) // 2)
        shuffles.append((s, sign))

    def comp(*idx):
        terms = []
        for s, sign in shuffles:
            rest = [idx[t] for t in range(p + q) if t not in s]
            left = a.tensor[tuple(idx[t] for t in s)]
            right = b.tensor[tuple(rest)]
            term = mul(left, right)
            terms.append(term if sign > 0 else mul(num(-1), term))
        return add(*terms)

    return DiffForm(p + q, build(chart, (-1,) * (p + q), comp))


def interior(v: TensorField, xi: DiffForm) -> DiffForm:
    """Interior product v -| xi; obeys the graded Leibniz rule with wedge."""
    if v.variance != (1,):
        raise ValueError("interior product needs a vector field")
    if xi.degree < 1:
        raise ValueError("interior product needs degree >= 1")
    dim = v.chart.dim

    def comp(*idx):
        return add(*(mul(v[(j,)], xi.tensor[(j,) + idx]) for j in range(dim)))

    return DiffForm(xi.degree - 1, build(v.chart, (-1,) * (xi.degree - 1), comp))


def ext_d(xi: DiffForm) -> DiffForm:
    """Exterior derivative, connection-free."""
    chart = xi.chart
    k = xi.degree
    if k == 0:
        return one_form(chart, tuple(diff(xi.tensor.comps[0], c) for c in chart.coords))

    def comp(*idx):
        terms = []
        for s in range(k + 1):
            rest = idx[:s] + idx[s + 1 :]
            d = diff(xi.tensor[rest], chart.coords[idx[s]])
            terms.append(d if s % 2 == 0 else mul(num(-1), d))
        return add(*terms)

    return DiffForm(k + 1, build(chart, (-1,) * (k + 1), comp))


def scalar_form(chart: Chart, e: Expr) -> DiffForm:
    return DiffForm(0, TensorField(chart, (), (e,)))


def form_from_bilinear(x: TensorField) -> DiffForm:
    """Read a (0,2) tensor X as the 2-form sum X_{mn} dx^m ^ dx^n."""
    if x.variance != (-1, -1):
        raise ValueError("need a (0,2) tensor")
    return DiffForm(2, build(x.chart, (-1, -1), lambda a, b: x[(a, b)] - x[(b, a)]))


def lift_two_form(xi: DiffForm) -> TensorField:
    """Antisymmetric (0,2) lift L of a 2-form with wedge(L) == xi."""
    if xi.degree != 2:
        raise ValueError("lift_two_form needs degree 2")
    half = Fraction(1, 2)
    return build(xi.chart, (-1, -1), lambda a, b: mul(num(half), xi.tensor[(a, b)]))


def two_form_components(xi: DiffForm) -> TensorField:
    """Components in the (1/2) xi_{nm} dx^m ^ dx^n convention of the source text."""
    if xi.degree != 2:
        raise ValueError("need degree 2")
    return build(xi.chart, (-1, -1), lambda a, b: xi.tensor[(b, a)])


def two_form_from_components(chart: Chart, comp: Callable[[int, int], Expr]) -> DiffForm:
    """Build the 2-form Sum_{n,m} comp(n, m) dx^m ^ dx^n (source-text convention)."""
    return DiffForm(2, build(chart, (-1, -1), lambda a, b: add(comp(b, a), mul(num(-1), comp(a, b)))))


# ---------------------------------------------------------------------------
# First-order pairs X0 + lambda X1 with lambda^2 = 0 and lambda* = -lambda.


@dataclass(frozen=True)
class FirstOrder:
    """Pair (zeroth, first) of like-shaped tensors or forms."""

    zeroth: object
    first: object

    def __post_init__(self):
        z, f = self.zeroth, self.first
        zt = z.tensor if isinstance(z, DiffForm) else z
        ft = f.tensor if isinstance(f, DiffForm) else f
        if zt.variance != ft.variance:
            raise ValueError("zeroth and first parts must have the same shape")

    def __add__(self, other: "FirstOrder") -> "FirstOrder":
        return FirstOrder(self.zeroth + other.zeroth, self.first + other.first)

    def __sub__(self, other: "FirstOrder") -> "FirstOrder":
        return FirstOrder(self.zeroth - other.zeroth, self.first - other.first)

    def map(self, fn) -> "FirstOrder":
        return FirstOrder(fn(self.zeroth), fn(self.first))


def classical(x) -> FirstOrder:
    zero = scale_form(x, 0) if isinstance(x, DiffForm) else scale(x, 0)
    return FirstOrder(x, zero)


def conjugate_pair(p: FirstOrder) -> FirstOrder:
    """Conjugation for real component expressions: lambda is imaginary."""
    neg = scale_form(p.first, -1) if isinstance(p.first, DiffForm) else scale(p.first, -1)
    return FirstOrder(p.zeroth, neg)
