"""Linear connections on the cotangent bundle.

Conventions, fixed once and validated against the worked geometries:

  nabla_j dx^i = -Gamma^i_{jk} dx^k
  T^i_{jk}     = Gamma^i_{jk} - Gamma^i_{kj}
  R^l_{ijk}    = Gamma^l_{ki,j} - Gamma^l_{ji,k}
               + Gamma^m_{ki} Gamma^l_{jm} - Gamma^m_{ji} Gamma^l_{km}

so that [nabla_k, nabla_i] xi = -R^s_{nki} dx^n (del_s -| xi) on 1-forms.
Covariant differentiation appends its index last (the semicolon slot); the
`hatted` argument names slots that are skipped when adding Gamma terms,
which is how iterated semicolons with a hatted index are realized.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .expr import Chart, Expr, ZERO, add, diff, mul, num
from .tensor import TensorField, build, inverse_matrix, lower_slot, swap_slots, zeros

__all__ = [
    "Connection",
    "bianchi_residuals",
    "connection_from_torsion",
    "covariant_derivative",
    "curvature_of",
    "form_commutator",
    "levi_civita",
    "torsion_of",
]


@dataclass(frozen=True)
class Connection:
    """Christoffel data Gamma^i_{jk}; transforms affinely, so not a TensorField."""

    chart: Chart
    gamma: tuple[Expr, ...]  # flat, index order (i, j, k)

    def __getitem__(self, idx: tuple[int, int, int]) -> Expr:
        i, j, k = idx
        d = self.chart.dim
        return self.gamma[(i * d + j) * d + k]

    @staticmethod
    def from_function(chart: Chart, fn) -> "Connection":
        d = chart.dim
        comps = tuple(fn(i, j, k) for i in range(d) for j in range(d) for k in range(d))
        return Connection(chart, comps)

    def coefficient_tensor(self) -> TensorField:
        """Gamma packed as a (1,2)-shaped component array (convenience only)."""
        return build(self.chart, (1, -1, -1), lambda i, j, k: self[(i, j, k)])


def torsion_of(c: Connection) -> TensorField:
    """T^i_{jk} = Gamma^i_{jk} - Gamma^i_{kj}, antisymmetric in the lower pair."""
    return build(c.chart, (1, -1, -1), lambda i, j, k: c[(i, j, k)] - c[(i, k, j)])


def curvature_of(c: Connection) -> TensorField:
    """R^l_{ijk} in the normative index layout (antisymmetric in j,k)."""
    chart = c.chart
    d = chart.dim
    x = chart.coords

    def comp(l, i, j, k):
        terms = [diff(c[(l, k, i)], x[j]), -diff(c[(l, j, i)], x[k])]
        for m in range(d):
            terms.append(mul(c[(m, k, i)], c[(l, j, m)]))
            terms.append(mul(num(-1), c[(m, j, i)], c[(l, k, m)]))
        return add(*terms)

    return build(chart, (1, -1, -1, -1), comp)


def covariant_derivative(t: TensorField, c: Connection, hatted: Iterable[int] = ()) -> TensorField:
    """Append one covariant slot; slots in `hatted` get no Gamma correction."""
    chart = t.chart
    d = chart.dim
    hat = frozenset(hatted)
    for s in hat:
        if not (0 <= s < t.rank):
            raise ValueError(f"hatted slot {s} out of range")

    def comp(*idx):
        base = idx[:-1]
        k = idx[-1]
        terms = [diff(t[base], chart.coords[k])]
        for s in range(t.rank):
            if s in hat:
                continue
            full = list(base)
            if t.variance[s] > 0:
                for m in range(d):
                    full[s] = m
                    terms.append(mul(c[(base[s], k, m)], t[tuple(full)]))
            else:
                for m in range(d):
                    full[s] = m
                    terms.append(mul(num(-1), c[(m, k, base[s])], t[tuple(full)]))
        return add(*terms)

    return build(chart, t.variance + (-1,), comp)


def form_commutator(xi_tensor: TensorField, c: Connection) -> TensorField:
    """Curvature commutator, appending two direction slots.

    Returns M with M[..., i, k] = ([nabla_i, nabla_k] t)_{...}, computed as
    the honest double derivative (the first direction slot is hatted on the
    second pass) antisymmetrized in the two directions.
    """
    once = covariant_derivative(xi_tensor, c)
    twice = covariant_derivative(once, c, hatted=(once.rank - 1,))
    # twice[..., i, k] = (nabla_k nabla_i t)_...
    return swap_slots(twice, twice.rank - 2, twice.rank - 1) - twice


def levi_civita(g: TensorField, ginv: TensorField | None = None) -> Connection:
    """Metric-compatible torsion-free connection from the Koszul formula."""
    chart = g.chart
    d = chart.dim
    x = chart.coords
    if ginv is None:
        inv, _ = inverse_matrix([[g[(i, j)] for j in range(d)] for i in range(d)])
        ginv = build(chart, (1, 1), lambda i, j: inv[i][j])
    half = num(Fraction(1, 2))

    def comp(a, b, c):
        terms = []
        for e in range(d):
            inner = add(diff(g[(e, b)], x[c]), diff(g[(e, c)], x[b]), mul(num(-1), diff(g[(b, c)], x[e])))
            terms.append(mul(half, ginv[(a, e)], inner))
        return add(*terms)

    return Connection.from_function(chart, comp)


def connection_from_torsion(
    g: TensorField, ginv: TensorField, torsion_up: TensorField
) -> tuple[Connection, TensorField]:
    """Unique metric-compatible connection with the given torsion.

    Returns (connection, S) where S^a_{bc} = (1/2) g^{ad} (T_{dbc} - T_{bcd} - T_{cbd})
    and connection = Levi-Civita + S.  The two defining postconditions
    (torsion round-trip and metricity) are cheap and are asserted by callers.
    """
    chart = g.chart
    d = chart.dim
    t_low = lower_slot(torsion_up, 0, g)  # T_{abc}
    half = num(Fraction(1, 2))

    def s_comp(a, b, c):
        terms = []
        for e in range(d):
            inner = add(
                t_low[(e, b, c)],
                mul(num(-1), t_low[(b, c, e)]),
                mul(num(-1), t_low[(c, b, e)]),
            )
            terms.append(mul(half, ginv[(a, e)], inner))
        return add(*terms)

    s = build(chart, (1, -1, -1), s_comp)
    lc = levi_civita(g, ginv)
    conn = Connection.from_function(chart, lambda a, b, c: lc[(a, b, c)] + s[(a, b, c)])
    return conn, s


def bianchi_residuals(c: Connection) -> tuple[TensorField, TensorField, TensorField, TensorField]:
    """Both sides of the first and second Bianchi identities with torsion.

    B1:  sum_cyc(abc) T^k_{bc;a}     =  sum_cyc(abc) (R^k_{abc} + T^k_{ai} T^i_{bc})
    B2:  sum_cyc(abc) R^k_{jbc;a}    =  sum_cyc(abc) R^k_{jai} T^i_{bc}

    These hold for every connection, so they self-test the derivative and
    curvature code paths; returned as (lhs1, rhs1, lhs2, rhs2).
    """
    chart = c.chart
    d = chart.dim
    tor = torsion_of(c)
    cur = curvature_of(c)
    tor_d = covariant_derivative(tor, c)  # T^k_{bc;a}
    cur_d = covariant_derivative(cur, c)  # R^k_{jbc;a}

    def cyc(fn, a, b, cc):
        return add(fn(a, b, cc), fn(b, cc, a), fn(cc, a, b))

    lhs1 = build(chart, (1, -1, -1, -1), lambda k, a, b, cc: cyc(lambda x, y, z: tor_d[(k, y, z, x)], a, b, cc))
    rhs1 = build(
        chart,
        (1, -1, -1, -1),
        lambda k, a, b, cc: cyc(
            lambda x, y, z: add(cur[(k, x, y, z)], *(mul(tor[(k, x, i)], tor[(i, y, z)]) for i in range(d))),
            a,
            b,
            cc,
        ),
    )
    lhs2 = build(
        chart,
        (1, -1, -1, -1, -1),
        lambda k, j, a, b, cc: cyc(lambda x, y, z: cur_d[(k, j, y, z, x)], a, b, cc),
    )
    rhs2 = build(
        chart,
        (1, -1, -1, -1, -1),
        lambda k, j, a, b, cc: cyc(
            lambda x, y, z: add(*(mul(cur[(k, j, x, i)], tor[(i, y, z)]) for i in range(d))),
            a,
            b,
            cc,
        ),
    )
    return lhs1, rhs1, lhs2, rhs2
