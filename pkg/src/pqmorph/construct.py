"""Constructors that build new morphism candidates from old ones.

Duality composes with the inversion x -> x/|x|^2 of the unit sphere in
R^(2p); direct sums and holomorphic combinations put candidates on product
charts; the radial family x_k/|x|^n supplies the closed-form tension ladder.
Constructors only build expressions and transform guards; they never assert
the hypotheses of the construction theorems, certification stays with the
checker (properness in particular is not preserved by duality).
"""

from __future__ import annotations

from fractions import Fraction

from .calculus import ComplexFunction
from .errors import NonHolomorphicInput, OddDimension, PqmorphError
from .expr import (Prim, add, mul, pow_, var, substitute, shift_vars,
                   free_vars, conjugate)
from .simplify import simplify
from .zerotest import Domain, Guard

__all__ = ["inversion", "dualize", "direct_sum", "post_compose_holomorphic",
           "holomorphic_combine", "radial_family"]


def _abs2(m, start=1):
    return add(*(pow_(var(k), 2) for k in range(start, m + 1)))


def inversion(p):
    """Components of the inversion i_p of the unit sphere in R^(2p)."""
    if p < 1:
        raise PqmorphError("inversion needs a positive half-dimension")
    m = 2 * p
    s = _abs2(m)
    return [mul(var(k), pow_(s, -1)) for k in range(1, m + 1)]


def dualize(f):
    """The dual function: f composed with the inversion of its chart.

    Requires an even chart dimension with the origin excluded by a guard.
    Guards are transported through the substitution; the squared norm guard
    is preserved (|i_p(x)| != 0 iff |x| != 0).
    """
    m = f.domain.dimension
    if m % 2:
        raise OddDimension(f"duality needs an even chart dimension, got {m}")
    if not f.metric.euclidean:
        raise PqmorphError("duality is defined on Euclidean charts")
    s = _abs2(m)
    mapping = {k: mul(var(k), pow_(s, -1)) for k in range(1, m + 1)}
    new_guards = [Guard(s, "pos")]
    for g in f.domain.guards:
        ge = simplify(substitute(g.expr, mapping),
                      Domain(m, [Guard(s, "pos")], box=f.domain.box))
        if ge is s or (g.expr is s and g.relation == "pos"):
            continue
        new_guards.append(Guard(ge, g.relation))
    dom = Domain(m, new_guards, box=f.domain.box, margin=f.domain.margin)
    expr = simplify(substitute(f.expr, mapping), dom)
    return ComplexFunction(expr, dom)


def direct_sum(f, g):
    """(x, y) -> f(x) + g(y) on the product chart R^(m+n)."""
    m = f.domain.dimension
    n = g.domain.dimension
    if not (f.metric.euclidean and g.metric.euclidean):
        raise PqmorphError("product charts are Euclidean-only")
    shifted = shift_vars(g.expr, m)
    guards = list(f.domain.guards)
    for gu in g.domain.guards:
        guards.append(Guard(shift_vars(gu.expr, m), gu.relation))
    box = tuple(f.domain.box) + tuple(g.domain.box)
    dom = Domain(m + n, guards, box=box,
                 margin=min(f.domain.margin, g.domain.margin))
    return ComplexFunction(add(f.expr, shifted), dom)


def _check_univariate(e, nvars):
    used = free_vars(e)
    if any(k > nvars for k in used):
        raise NonHolomorphicInput(
            f"combination formula may only use w1..w{nvars}")
    _check_holomorphic_prims(e)


def _check_holomorphic_prims(e):
    # every primitive in the IR acts holomorphically on its complex argument
    # (principal branches); acos is holomorphic off its cuts as well.
    stack = [e]
    seen = set()
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        if isinstance(n, Prim) and n.name not in ("log", "exp", "sin", "cos", "acos"):
            raise NonHolomorphicInput(f"primitive {n.name} is not holomorphic")
        for attr in ("terms", "factors"):
            if hasattr(n, attr):
                stack.extend(getattr(n, attr))
        if hasattr(n, "base"):
            stack.append(n.base)
        if hasattr(n, "arg"):
            stack.append(n.arg)


def post_compose_holomorphic(f_expr, phi):
    """f(phi) for a univariate holomorphic formula f in the symbol w = x1."""
    _check_univariate(f_expr, 1)
    expr = substitute(f_expr, {1: phi.expr})
    return phi.with_expr(simplify(expr, phi.domain))


def holomorphic_combine(f_expr, phi, psi):
    """f(phi(x), psi(y)) on the product chart, f holomorphic in w1 = x1,
    w2 = x2."""
    _check_univariate(f_expr, 2)
    m = phi.domain.dimension
    n = psi.domain.dimension
    if not (phi.metric.euclidean and psi.metric.euclidean):
        raise PqmorphError("product charts are Euclidean-only")
    psi_shifted = shift_vars(psi.expr, m)
    guards = list(phi.domain.guards)
    for gu in psi.domain.guards:
        guards.append(Guard(shift_vars(gu.expr, m), gu.relation))
    box = tuple(phi.domain.box) + tuple(psi.domain.box)
    dom = Domain(m + n, guards, box=box,
                 margin=min(phi.domain.margin, psi.domain.margin))
    expr = substitute(f_expr, {1: phi.expr, 2: psi_shifted})
    return ComplexFunction(simplify(expr, dom), dom)


def radial_family(n, p_dim):
    """Components x_k / |x|^n on R^p_dim; tension is n(n-p) x_k/|x|^(n+2)."""
    if n < 1 or p_dim < 1:
        raise PqmorphError("radial family needs n >= 1 and p_dim >= 1")
    s = _abs2(p_dim)
    dom = Domain(p_dim, [Guard(s, "pos")])
    q = Fraction(-n, 2)
    return [ComplexFunction(mul(var(k), pow_(s, q)), dom)
            for k in range(1, p_dim + 1)]
