"""Geometric data bundle: chart, metric, Poisson bivector, quantizing connection.

A Geometry owns the classical inputs and lazily caches everything derived
from them (inverse metric, Levi-Civita connection, contorsion, torsion,
curvatures).  All caches are write-once values of pure computations, so
concurrent recomputation is harmless.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

from . import expr as ex
from .expr import Chart, Expr, SampleSpec, add, diff, mul, num
from .connection import Connection, covariant_derivative, curvature_of, levi_civita, torsion_of
from .tensor import (
    DiffForm,
    TensorField,
    build,
    inverse_matrix,
    lower_slot,
    one_form,
    tensor_product,
)

__all__ = ["CompatReport", "Geometry", "PoissonCompatibilityError", "Verdict", "compat_report"]


class PoissonCompatibilityError(RuntimeError):
    """Raised when a quantum operation is asked for on incompatible data."""


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    citation: str = ""
    detail: str = ""


@dataclass(eq=False)
class Geometry:
    """Classical input data (chart, g, omega, quantizing connection) plus sampling.

    frame, if given, is a tuple of 1-forms used only for reporting components
    in a preferred basis (for instance (v, dr)); all computation stays in
    coordinates.  generators lists the scalar generators whose commutation
    relations are reported; it defaults to the coordinates themselves.
    """

    chart: Chart
    g: TensorField
    omega: TensorField
    conn: Connection
    sampling: SampleSpec
    name: str = ""
    frame: tuple[DiffForm, ...] | None = None
    generators: tuple[tuple[str, Expr], ...] = ()

    def __post_init__(self):
        if self.g.variance != (-1, -1):
            raise ValueError("metric must be a (0,2) tensor")
        if self.omega.variance != (1, 1):
            raise ValueError("bivector must be a (2,0) tensor")
        if not self.generators:
            self.generators = tuple((c, ex.coord(c)) for c in self.chart.coords)

    @property
    def dim(self) -> int:
        return self.chart.dim

    @cached_property
    def metric_inverse(self) -> TensorField:
        d = self.dim
        inv, det = inverse_matrix([[self.g[(i, j)] for j in range(d)] for i in range(d)])
        object.__setattr__(self, "_det", det)
        return build(self.chart, (1, 1), lambda i, j: inv[i][j])

    @cached_property
    def metric_determinant(self) -> Expr:
        self.metric_inverse
        return self._det  # type: ignore[attr-defined]

    @cached_property
    def levi_civita(self) -> Connection:
        return levi_civita(self.g, self.metric_inverse)

    @cached_property
    def contorsion(self) -> TensorField:
        """S with nabla_S = quantizing + S = Levi-Civita; S^a_{bc} = Gamma^a_{bc} - LC^a_{bc}."""
        lc = self.levi_civita
        return build(self.chart, (1, -1, -1), lambda a, b, c: self.conn[(a, b, c)] - lc[(a, b, c)])

    @cached_property
    def torsion(self) -> TensorField:
        return torsion_of(self.conn)

    @cached_property
    def torsion_lowered(self) -> TensorField:
        return lower_slot(self.torsion, 0, self.g)

    @cached_property
    def curvature(self) -> TensorField:
        return curvature_of(self.conn)

    @cached_property
    def curvature_lc(self) -> TensorField:
        return curvature_of(self.levi_civita)

    @cached_property
    def omega_pairs(self) -> tuple[tuple[int, int, Expr], ...]:
        """Nonzero entries of the bivector, for sparse double sums."""
        d = self.dim
        out = []
        for i in range(d):
            for j in range(d):
                w = self.omega[(i, j)]
                if not w.is_zero():
                    out.append((i, j, w))
        return tuple(out)

    @cached_property
    def torsion_derivative(self) -> TensorField:
        """T^j_{nm;s} with respect to the quantizing connection."""
        return covariant_derivative(self.torsion, self.conn)

    @cached_property
    def contorsion_derivative(self) -> TensorField:
        """S^p_{nm;j} (full), the module-map derivative of the contorsion."""
        return covariant_derivative(self.contorsion, self.conn)

    # -- equality helpers -------------------------------------------------

    def equiv(self, a, b) -> bool:
        return self.max_violation(a, b) <= 0.0

    def max_violation(self, a, b) -> float:
        return ex.max_violation(self._pairs(a, b), self.sampling, self.chart)

    def _pairs(self, a, b):
        if isinstance(a, Expr):
            return [(a, b)]
        at = a.tensor if isinstance(a, DiffForm) else a
        bt = b.tensor if isinstance(b, DiffForm) else b
        if isinstance(bt, TensorField):
            if at.variance != bt.variance:
                raise ValueError("shape mismatch in equivalence test")
            return list(zip(at.comps, bt.comps))
        raise TypeError(f"cannot compare {type(a)} with {type(b)}")

    def is_zero(self, a) -> bool:
        t = a.tensor if isinstance(a, DiffForm) else a
        if isinstance(t, Expr):
            return self.equiv(t, ex.ZERO)
        return ex.equiv_many([(c, ex.ZERO) for c in t.comps], self.sampling, self.chart)

    def require_compat(self):
        rep = compat_report(self)
        if not rep.poisson.passed:
            raise PoissonCompatibilityError(
                f"geometry {self.name or '<unnamed>'}: Poisson-compatibility residual is nonzero"
            )
        return rep


@dataclass(frozen=True)
class CompatReport:
    poisson: Verdict
    jacobi: Verdict
    metricity: Verdict
    contorsion_form: Verdict | None

    @property
    def hard_ok(self) -> bool:
        return self.poisson.passed and self.metricity.passed

    def verdicts(self) -> list[Verdict]:
        out = [self.poisson, self.jacobi, self.metricity]
        if self.contorsion_form is not None:
            out.append(self.contorsion_form)
        return out


def compat_report(geo: Geometry) -> CompatReport:
    """Residual checks tying the bivector, connection and metric together.

    The Poisson-compatibility residual is computed in the Christoffel form
    (derivative of omega against Gamma contractions); when the metric is
    preserved it is recomputed independently in the Levi-Civita/contorsion
    form and the two verdicts must agree.  A Jacobi failure is only a
    warning: nothing at first order actually requires it.
    """
    cached = getattr(geo, "_compat_cache", None)
    if cached is not None:
        return cached
    chart = geo.chart
    d = geo.dim
    x = chart.coords
    conn = geo.conn
    omega = geo.omega

    lhs_p, rhs_p = [], []
    for i in range(d):
        for j in range(d):
            for m in range(d):
                lhs_p.append(diff(omega[(i, j)], x[m]))
                rhs_p.append(
                    add(
                        *(mul(num(-1), omega[(k, j)], conn[(i, k, m)]) for k in range(d)),
                        *(mul(num(-1), omega[(i, k)], conn[(j, k, m)]) for k in range(d)),
                    )
                )
    poisson_ok = ex.equiv_many(list(zip(lhs_p, rhs_p)), geo.sampling, chart)
    poisson = Verdict("poisson-compatibility", poisson_ok, "compatibility of (omega, nabla)")

    lhs_j, rhs_j = [], []
    for i in range(d):
        for j in range(d):
            for k in range(d):
                cyc = [(i, j, k), (j, k, i), (k, i, j)]
                lhs_j.append(add(*(mul(omega[(a, m)], diff(omega[(b, c)], x[m])) for a, b, c in cyc for m in range(d))))
                rhs_j.append(ex.ZERO)
    jacobi_ok = ex.equiv_many(list(zip(lhs_j, rhs_j)), geo.sampling, chart)
    jacobi = Verdict("jacobi", jacobi_ok, "Poisson property of omega", "warning only" if not jacobi_ok else "")

    lhs_m, rhs_m = [], []
    for i in range(d):
        for j in range(d):
            for m in range(d):
                lhs_m.append(diff(geo.g[(i, j)], x[m]))
                rhs_m.append(
                    add(
                        *(mul(conn[(k, m, i)], geo.g[(k, j)]) for k in range(d)),
                        *(mul(conn[(k, m, j)], geo.g[(i, k)]) for k in range(d)),
                    )
                )
    metric_ok = ex.equiv_many(list(zip(lhs_m, rhs_m)), geo.sampling, chart)
    metricity = Verdict("metric-compatibility", metric_ok, "nabla g = 0")

    contorsion_form = None
    if metric_ok:
        s = geo.contorsion
        lc = geo.levi_civita
        lhs_c, rhs_c = [], []
        for i in range(d):
            for j in range(d):
                for k in range(d):
                    dw = add(
                        diff(omega[(i, j)], x[k]),
                        *(mul(lc[(i, k, m)], omega[(m, j)]) for m in range(d)),
                        *(mul(lc[(j, k, m)], omega[(i, m)]) for m in range(d)),
                    )
                    lhs_c.append(dw)
                    rhs_c.append(
                        add(
                            *(mul(num(-1), omega[(i, r)], s[(j, r, k)]) for r in range(d)),
                            *(mul(omega[(j, r)], s[(i, r, k)]) for r in range(d)),
                        )
                    )
        alt_ok = ex.equiv_many(list(zip(lhs_c, rhs_c)), geo.sampling, chart)
        agree = alt_ok == poisson_ok
        contorsion_form = Verdict(
            "poisson-compatibility (contorsion form)",
            alt_ok and agree,
            "equivalent Levi-Civita/contorsion formulation",
            "" if agree else "disagrees with the Christoffel form",
        )

    report = CompatReport(poisson, jacobi, metricity, contorsion_form)
    object.__setattr__(geo, "_compat_cache", report)
    return report
