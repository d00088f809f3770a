"""Order-lambda deformed products and the structures they hinge on.

Everything here returns FirstOrder pairs (classical part, lambda coefficient)
in the plain-component normal form in which the source formulas are written:
coefficient functions attach to the first tensor factor when a derivative
correction has to pick a factor.  That convention is fixed once, in
q_correction, and every worked-example value in the test-suite pins it.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from .expr import Expr, ZERO, add, diff, mul, num
from .connection import covariant_derivative
from .geometry import Geometry
from .tensor import (
    DiffForm,
    FirstOrder,
    TensorField,
    build,
    form_from_bilinear,
    interior,
    lift_two_form,
    one_form,
    scalar_form,
    scale,
    scale_form,
    tensor_product,
    two_form_from_components,
    wedge,
    zero_form,
    zeros,
)

__all__ = [
    "generator_relations",
    "h_field",
    "generalized_ricci",
    "module_product",
    "nabla_direction",
    "q_correction",
    "q_map",
    "sigma_braiding",
    "star_product",
    "star_commutator",
    "wedge1",
    "wedge1_element",
]

HALF = num(Fraction(1, 2))
QUARTER = num(Fraction(1, 4))


def poisson_bracket(a: Expr, b: Expr, geo: Geometry) -> Expr:
    x = geo.chart.coords
    return add(*(mul(w, diff(a, x[i]), diff(b, x[j])) for i, j, w in geo.omega_pairs))


def star_product(a: Expr, b: Expr, geo: Geometry) -> FirstOrder:
    """a * b = ab + (lambda/2){a,b}."""
    chart = geo.chart
    return FirstOrder(
        scalar_form(chart, mul(a, b)),
        scalar_form(chart, mul(HALF, poisson_bracket(a, b, geo))),
    )


def star_commutator(a: Expr, b: Expr, geo: Geometry) -> Expr:
    """Lambda coefficient of [a, b]; the classical part cancels."""
    return poisson_bracket(a, b, geo)


def nabla_direction(t: TensorField, i: int, geo: Geometry) -> TensorField:
    """Covariant derivative along a single coordinate direction (quantizing)."""
    d = covariant_derivative(t, geo.conn)
    dim = geo.dim

    def comp(*idx):
        return d[idx + (i,)]

    return build(geo.chart, t.variance, comp)


def module_product(a: Expr, xi: DiffForm, side: str, geo: Geometry) -> FirstOrder:
    """Deformed action of a function on a form: a*xi or xi*a.

    The commutator of the two is lambda omega^{ij} a_{,i} nabla_j xi.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    chart = geo.chart
    x = chart.coords
    cov = covariant_derivative(xi.tensor, geo.conn)
    dim = geo.dim

    def corr(*idx):
        terms = []
        for i, j, w in geo.omega_pairs:
            terms.append(mul(w, diff(a, x[i]), cov[idx + (j,)]))
        return mul(HALF, add(*terms)) if terms else ZERO

    sign = 1 if side == "left" else -1
    first = DiffForm(xi.degree, build(chart, xi.tensor.variance, corr))
    if sign < 0:
        first = scale_form(first, -1)
    return FirstOrder(scale_form(xi, a), first)


def module_commutator(a: Expr, xi: DiffForm, geo: Geometry) -> DiffForm:
    """Lambda coefficient of [a, xi] = lambda omega^{ij} a_{,i} nabla_j xi."""
    left = module_product(a, xi, "left", geo)
    return scale_form(left.first, 2)


# ---------------------------------------------------------------------------
# q corrections


def q_map(v: TensorField, w: TensorField, geo: Geometry, inverse: bool = False) -> FirstOrder:
    """Monoidal structure map on a pair of factors.

    q(v (x) w) = v (x) w + (lambda/2) omega^{ij} nabla_i v (x) nabla_j w,
    with the sign flipped for the inverse.  Each factor keeps its own
    coefficients, so the correction uses full covariant derivatives.
    """
    if v.chart != w.chart:
        raise ValueError("chart mismatch")
    dv = covariant_derivative(v, geo.conn)
    dw = covariant_derivative(w, geo.conn)
    rv, rw = v.rank, w.rank
    sign = num(Fraction(-1, 2) if inverse else Fraction(1, 2))

    def corr(*idx):
        a, b = idx[:rv], idx[rv:]
        terms = [mul(wij, dv[a + (i,)], dw[b + (j,)]) for i, j, wij in geo.omega_pairs]
        return mul(sign, add(*terms)) if terms else ZERO

    first = build(geo.chart, v.variance + w.variance, corr)
    return FirstOrder(tensor_product(v, w), first)


def q_correction(x: TensorField, split: int, geo: Geometry, sign: int) -> TensorField:
    """Lambda correction of q^{+-1} applied to a single covariant tensor.

    The tensor is read as (coefficients on the first `split` slots) (x)
    (bare basis forms on the rest), the normal form in which the source
    displays its corrected metrics and connections.
    """
    if any(v != -1 for v in x.variance):
        raise ValueError("q_correction expects a fully covariant tensor")
    chart = geo.chart
    dim = geo.dim
    conn = geo.conn
    rank = x.rank
    rest = range(split, rank)
    pref = num(Fraction(sign, 2))

    def comp(*idx):
        terms = []
        for i, j, wij in geo.omega_pairs:
            for s in rest:
                gs = [conn[(k, j, idx[s])] for k in range(dim)]
                for k in range(dim):
                    if gs[k].is_zero():
                        continue
                    src = list(idx)
                    src[s] = k
                    inner = [diff(x[tuple(src)], chart.coords[i])]
                    for t in range(split):
                        for m in range(dim):
                            src2 = list(src)
                            src2[t] = m
                            inner.append(mul(num(-1), conn[(m, i, idx[t])], x[tuple(src2)]))
                    # nabla_j picks up the minus from nabla_j dx^k = -Gamma^k_{jl} dx^l
                    terms.append(mul(num(-1), wij, gs[k], add(*inner)))
        return mul(pref, add(*terms)) if terms else ZERO

    return build(chart, x.variance, comp)


# ---------------------------------------------------------------------------
# H field, quantum wedge, generalised Ricci 2-form


def h_field(geo: Geometry) -> list[list[DiffForm]]:
    """The 2-form-valued correction tensor driving the quantum wedge.

    H^{ij} = (1/4) omega^{is} (T^j_{nm;s} - 2 R^j_{nms}) dx^m ^ dx^n.
    """
    dim = geo.dim
    td = geo.torsion_derivative
    r = geo.curvature
    out: list[list[DiffForm]] = []
    for i in range(dim):
        row = []
        for j in range(dim):

            def comp(n, m, i=i, j=j):
                terms = []
                for ii, s, w in geo.omega_pairs:
                    if ii != i:
                        continue
                    terms.append(mul(w, add(td[(j, n, m, s)], mul(num(-2), r[(j, n, m, s)]))))
                return mul(QUARTER, add(*terms)) if terms else ZERO

            row.append(two_form_from_components(geo.chart, comp))
        out.append(row)
    return out


def generalized_ricci(geo: Geometry, h: list[list[DiffForm]] | None = None) -> DiffForm:
    """Generalised Ricci 2-form, the metric trace of H."""
    h = h if h is not None else h_field(geo)
    dim = geo.dim
    out = zero_form(geo.chart, 2)
    for i in range(dim):
        for j in range(dim):
            gij = geo.g[(i, j)]
            if not gij.is_zero():
                out = out + scale_form(h[i][j], gij)
    return out


def wedge1(xi: DiffForm | FirstOrder, eta: DiffForm | FirstOrder, geo: Geometry, h=None) -> FirstOrder:
    """Quantum wedge product to order lambda.

    Degree-0 factors degrade to the module/star products.  FirstOrder
    arguments contribute their lambda parts through the classical wedge.
    """
    if isinstance(xi, FirstOrder) or isinstance(eta, FirstOrder):
        xi_p = xi if isinstance(xi, FirstOrder) else FirstOrder(xi, zero_like(xi))
        eta_p = eta if isinstance(eta, FirstOrder) else FirstOrder(eta, zero_like(eta))
        base = wedge1(xi_p.zeroth, eta_p.zeroth, geo, h)
        extra = wedge(xi_p.zeroth, eta_p.first) + wedge(xi_p.first, eta_p.zeroth)
        return FirstOrder(base.zeroth, base.first + extra)

    if xi.degree == 0 and eta.degree == 0:
        return star_product(xi.tensor.comps[0], eta.tensor.comps[0], geo)
    if xi.degree == 0:
        return module_product(xi.tensor.comps[0], eta, "left", geo)
    if eta.degree == 0:
        return module_product(eta.tensor.comps[0], xi, "right", geo)

    h = h if h is not None else h_field(geo)
    chart = geo.chart
    dxi = covariant_derivative(xi.tensor, geo.conn)
    deta = covariant_derivative(eta.tensor, geo.conn)
    corr = zero_form(chart, xi.degree + eta.degree)
    for i, j, w in geo.omega_pairs:
        a = DiffForm(xi.degree, build(chart, xi.tensor.variance, lambda *idx: dxi[idx + (i,)]))
        b = DiffForm(eta.degree, build(chart, eta.tensor.variance, lambda *idx: deta[idx + (j,)]))
        corr = corr + scale_form(wedge(a, b), mul(HALF, w))
    sign = (-1) ** (xi.degree + 1)
    basis = [build(chart, (1,), lambda k, i=i: num(1 if k == i else 0)) for i in range(geo.dim)]
    for i in range(geo.dim):
        ii = interior(basis[i], xi)
        if ii.is_syntactically_zero():
            continue
        for j in range(geo.dim):
            jj = interior(basis[j], eta)
            if jj.is_syntactically_zero():
                continue
            term = wedge(h[i][j], wedge(ii, jj))
            corr = corr + (scale_form(term, sign) if sign < 0 else term)
    return FirstOrder(wedge(xi, eta), corr)


def zero_like(x: DiffForm) -> DiffForm:
    return scale_form(x, 0)


def wedge1_element(x: TensorField, geo: Geometry, h=None) -> FirstOrder:
    """Quantum wedge applied to an element of the double 1-form tensor square.

    For X = X_{mn} dx^m (x)_1 dx^n this returns the FirstOrder 2-form
    wedge_1(X); the functorial q-parts act with the coefficients on the
    first factor, and the contraction X_{ij} H^{ij} carries the nonlinear
    correction.  This is the single code path behind quantum symmetry and
    quantum torsion checks.
    """
    if x.variance != (-1, -1):
        raise ValueError("need a (0,2) tensor")
    h = h if h is not None else h_field(geo)
    chart = geo.chart
    dim = geo.dim
    conn = geo.conn
    zeroth = form_from_bilinear(x)

    def func_comp(n, m):
        # (1/2) omega^{ij} nabla_i(X_{ab} dx^a) ^ nabla_j dx^b lands on
        # dx^a ^ dx^l; the builder reads comp(n, m) against dx^m ^ dx^n,
        # so here m plays the X-first-slot role and n the contracted l.
        terms = []
        for i, j, w in geo.omega_pairs:
            for b in range(dim):
                gbl = conn[(b, j, n)]
                if gbl.is_zero():
                    continue
                inner = [diff(x[(m, b)], chart.coords[i])]
                for k in range(dim):
                    inner.append(mul(num(-1), conn[(k, i, m)], x[(k, b)]))
                terms.append(mul(num(-1), w, gbl, add(*inner)))
        return mul(HALF, add(*terms)) if terms else ZERO

    functorial = two_form_from_components(chart, func_comp)
    hterm = zero_form(chart, 2)
    for i in range(dim):
        for j in range(dim):
            c = x[(i, j)]
            if not c.is_zero():
                hterm = hterm + scale_form(h[i][j], c)
    return FirstOrder(zeroth, functorial + hterm)


# ---------------------------------------------------------------------------
# Generalised braiding


def sigma_braiding(e: DiffForm, xi: DiffForm, geo: Geometry, with_contorsion: bool = False) -> FirstOrder:
    """sigma(e (x) xi) for a 1-form e and a k-form xi.

    Classical part is transposition xi (x) e; the lambda part carries the
    functorial derivative term, the curvature term through the interior
    product, and (for the Levi-Civita-relative braiding) the extra
    contorsion-derivative term.
    """
    if e.degree != 1:
        raise ValueError("first argument must be a 1-form")
    chart = geo.chart
    dim = geo.dim
    de = covariant_derivative(e.tensor, geo.conn)
    dxi = covariant_derivative(xi.tensor, geo.conn)
    r = geo.curvature
    var = xi.tensor.variance + (-1,)

    # functorial term: omega^{ij} (nabla_j xi) (x) (nabla_i e)
    def corr_func(*idx):
        xslot, a = idx[:-1], idx[-1]
        terms = [mul(w, dxi[xslot + (j,)], de[(a, i)]) for i, j, w in geo.omega_pairs]
        return add(*terms) if terms else ZERO

    func = build(chart, var, corr_func)

    # curvature term: omega^{ij} (dx^k ^ (del_j -| xi)) (x) [nabla_k, nabla_i] e
    # with [nabla_k, nabla_i] e = -R^s_{aki} e_s dx^a.
    basis = [build(chart, (1,), lambda k, i=i: num(1 if k == i else 0)) for i in range(dim)]
    curv = zeros(chart, var)
    for i, j, w in geo.omega_pairs:
        if xi.degree < 1:
            continue
        pulled = interior(basis[j], xi)
        for k in range(dim):
            dxk = DiffForm(1, build(chart, (-1,), lambda l, k=k: num(1 if l == k else 0)))
            front = wedge(dxk, pulled)

            def comp(*idx, i=i, k=k, w=w, front=front):
                xslot, a = idx[:-1], idx[-1]
                terms = []
                for s in range(dim):
                    rx = r[(s, a, k, i)]
                    if rx.is_zero():
                        continue
                    terms.append(mul(num(-1), w, front.tensor[xslot], rx, e.tensor[(s,)]))
                return add(*terms) if terms else ZERO

            curv = curv + build(chart, var, comp)

    total = func + curv

    if with_contorsion:
        if xi.degree != 1:
            raise ValueError("contorsion braiding term is defined against 1-forms")
        sd = geo.contorsion_derivative  # S^p_{nm;j}

        def comp_s(*idx):
            n, m, _unused = idx[0], idx[1], None
            terms = []
            for i, j, w in geo.omega_pairs:
                xi_i = xi.tensor[(i,)]
                if xi_i.is_zero():
                    continue
                inner = [mul(e.tensor[(p,)], sd[(p, n, m, j)]) for p in range(geo.dim)]
                terms.append(mul(w, xi_i, add(*inner)))
            return add(*terms) if terms else ZERO

        total = total + build(chart, var, comp_s)

    return FirstOrder(
        tensor_product(xi.tensor, e.tensor),
        total,
    )


# ---------------------------------------------------------------------------
# Generator relations


def generator_relations(geo: Geometry) -> list[tuple[str, Expr | DiffForm]]:
    """[a, b], [a, dx^j] and {dx^i, dx^j} lambda coefficients on the generators."""
    out: list[tuple[str, Expr | DiffForm]] = []
    gens = list(geo.generators)
    chart = geo.chart
    for (na, a), (nb, b) in itertools.combinations(gens, 2):
        out.append((f"[{na}, {nb}]", star_commutator(a, b, geo)))
    basis = [DiffForm(1, build(chart, (-1,), lambda k, i=i: num(1 if k == i else 0))) for i in range(geo.dim)]
    for na, a in gens:
        for j in range(geo.dim):
            out.append((f"[{na}, d{chart.coords[j]}]", module_commutator(a, basis[j], geo)))
    h = h_field(geo)
    for i in range(geo.dim):
        for j in range(i, geo.dim):
            anti = wedge1(basis[i], basis[j], geo, h).first + wedge1(basis[j], basis[i], geo, h).first
            out.append((f"{{d{chart.coords[i]}, d{chart.coords[j]}}}", anti))
    return out
