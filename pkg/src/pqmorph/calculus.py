"""Symbolic differential operators on coordinate charts.

The tension field (Laplace-Beltrami operator) of a complex-valued function
on a chart with metric g is

    tau(z) = (1/sqrt|g|) * sum_j d/dx_j ( g^ij sqrt|g| dz/dx_i )

and the conformality operator is the complex-bilinear kappa(z, w) =
g(grad z, grad w) = sum g^ij dz/dx_i dw/dx_j.  Euclidean charts take the
fast path (plain Laplacian / dot product of gradients).  Partial derivatives
are memoized per (expression, variable) pair, and iterated tension
normalizes between steps; without both, higher iterates blow past any
budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import DimensionMismatch, MetricSingular, MissingPartial, PqmorphError
from .expr import (
    CRat, Const, Var, Sum, Product, Power, Prim, ZERO, ONE,
    add, mul, pow_, prim, const, neg, sub, conjugate,
)
from .simplify import simplify
from .zerotest import Domain

__all__ = ["Metric", "ComplexFunction", "partial", "gradient", "tension",
           "kappa", "iterate_tension", "tension_of_composition", "conj_function"]


# ---------------------------------------------------------------------------
# Partial derivatives
# ---------------------------------------------------------------------------

_PARTIAL_MEMO: dict = {}
_HALF = Fraction(1, 2)


def partial(e, k):
    """d e / d x_k, treating all variables as real."""
    key = (e, k)
    got = _PARTIAL_MEMO.get(key)
    if got is not None:
        return got
    if isinstance(e, Const):
        out = ZERO
    elif isinstance(e, Var):
        out = ONE if e.index == k else ZERO
    elif isinstance(e, Sum):
        out = add(*(partial(t, k) for t in e.terms))
    elif isinstance(e, Product):
        pieces = []
        for i, f in enumerate(e.factors):
            df = partial(f, k)
            if df is ZERO:
                continue
            rest = e.factors[:i] + e.factors[i + 1:]
            pieces.append(mul(df, *rest))
        out = add(*pieces) if pieces else ZERO
    elif isinstance(e, Power):
        db = partial(e.base, k)
        if db is ZERO:
            out = ZERO
        else:
            q = e.exponent
            out = mul(const(CRat(q)), pow_(e.base, q - 1), db)
    else:
        da = partial(e.arg, k)
        if da is ZERO:
            out = ZERO
        else:
            u = e.arg
            if e.name == "log":
                out = mul(da, pow_(u, -1))
            elif e.name == "exp":
                out = mul(e, da)
            elif e.name == "sin":
                out = mul(prim("cos", u), da)
            elif e.name == "cos":
                out = neg(mul(prim("sin", u), da))
            elif e.name == "acos":
                out = neg(mul(da, pow_(sub(ONE, pow_(u, 2)), -_HALF)))
            else:
                raise PqmorphError(f"no derivative rule for {e.name}")
    _PARTIAL_MEMO[key] = out
    return out


# ---------------------------------------------------------------------------
# Metrics and chart functions
# ---------------------------------------------------------------------------

class Metric:
    """Symmetric matrix of expressions; the Euclidean flag short-circuits."""

    def __init__(self, entries, euclidean=False):
        self.entries = tuple(tuple(row) for row in entries)
        self.dimension = len(self.entries)
        self.euclidean = euclidean
        for i in range(self.dimension):
            if len(self.entries[i]) != self.dimension:
                raise PqmorphError("metric matrix must be square")
            for j in range(i):
                if self.entries[i][j] is not self.entries[j][i]:
                    raise PqmorphError("metric matrix must be symmetric")
        self._det = None
        self._adj = None

    @classmethod
    def euclid(cls, m):
        rows = [[ONE if i == j else ZERO for j in range(m)] for i in range(m)]
        g = cls(rows, euclidean=True)
        return g

    def _minor(self, rows, cols, memo):
        if not rows:
            return ONE
        key = (rows, cols)
        got = memo.get(key)
        if got is not None:
            return got
        r0 = rows[0]
        rest = rows[1:]
        terms = []
        for pos, c in enumerate(cols):
            entry = self.entries[r0][c]
            if entry is ZERO:
                continue
            sub_cols = cols[:pos] + cols[pos + 1:]
            minor = self._minor(rest, sub_cols, memo)
            term = mul(entry, minor)
            terms.append(term if pos % 2 == 0 else neg(term))
        out = add(*terms) if terms else ZERO
        memo[key] = out
        return out

    def determinant(self):
        if self._det is None:
            idx = tuple(range(self.dimension))
            self._det = simplify(self._minor(idx, idx, {}))
        return self._det

    def inverse_entries(self):
        """g^ij as adjugate/determinant; raises MetricSingular on det == 0."""
        if self._adj is None:
            det = self.determinant()
            if det is ZERO:
                raise MetricSingular("metric determinant is identically zero")
            m = self.dimension
            idx = tuple(range(m))
            memo = {}
            inv = []
            for i in range(m):
                row = []
                for j in range(m):
                    rows = idx[:j] + idx[j + 1:]
                    cols = idx[:i] + idx[i + 1:]
                    cof = self._minor(rows, cols, memo)
                    if (i + j) % 2:
                        cof = neg(cof)
                    row.append(simplify(mul(cof, pow_(det, -1))))
                inv.append(row)
            self._adj = tuple(tuple(r) for r in inv)
        return self._adj

    def __repr__(self):
        tag = "euclidean " if self.euclidean else ""
        return f"Metric({tag}dim={self.dimension})"


class ComplexFunction:
    """A complex-valued function on a coordinate chart with a metric."""

    def __init__(self, expr, domain, metric=None):
        if isinstance(domain, int):
            domain = Domain(domain)
        if metric is None:
            metric = Metric.euclid(domain.dimension)
        if metric.dimension != domain.dimension:
            raise DimensionMismatch(
                f"metric dim {metric.dimension} != chart dim {domain.dimension}")
        if expr.max_var > domain.dimension:
            raise DimensionMismatch(
                f"expression uses x{expr.max_var} on a {domain.dimension}-chart")
        self.expr = expr
        self.domain = domain
        self.metric = metric

    def with_expr(self, expr):
        return ComplexFunction(expr, self.domain, self.metric)

    def __repr__(self):
        return f"ComplexFunction({self.expr!r}, dim={self.domain.dimension})"


def conj_function(f):
    return f.with_expr(conjugate(f.expr))


def _check_compatible(f, h):
    if f.domain.dimension != h.domain.dimension or f.metric is not h.metric:
        if f.domain.dimension != h.domain.dimension:
            raise DimensionMismatch("operands live on charts of different dimension")
        if f.metric.entries != h.metric.entries:
            raise DimensionMismatch("operands carry different metrics")


# ---------------------------------------------------------------------------
# Differential operators
# ---------------------------------------------------------------------------

def gradient(f):
    """Contravariant gradient components, one per chart variable."""
    m = f.domain.dimension
    if f.metric.euclidean:
        return [partial(f.expr, k) for k in range(1, m + 1)]
    ginv = f.metric.inverse_entries()
    out = []
    for k in range(m):
        comps = [mul(ginv[k][j], partial(f.expr, j + 1)) for j in range(m)]
        out.append(simplify(add(*comps)))
    return out


def tension(f, do_simplify=True):
    """Tension field (Laplace-Beltrami) of f on its chart."""
    e = f.expr
    m = f.domain.dimension
    if f.metric.euclidean:
        out = add(*(partial(partial(e, k), k) for k in range(1, m + 1)))
    else:
        det = f.metric.determinant()
        if det is ZERO:
            raise MetricSingular("metric determinant is identically zero")
        ginv = f.metric.inverse_entries()
        sq = pow_(det, _HALF)
        inv_sq = pow_(det, -_HALF)
        pieces = []
        for j in range(m):
            inner = add(*(mul(ginv[i][j], sq, partial(e, i + 1)) for i in range(m)))
            pieces.append(partial(simplify(inner), j + 1))
        out = mul(inv_sq, add(*pieces))
    return simplify(out, f.domain) if do_simplify else out


def kappa(f, h):
    """Conformality operator g(grad f, grad h); complex bilinear, symmetric."""
    _check_compatible(f, h)
    m = f.domain.dimension
    if f.metric.euclidean:
        out = add(*(mul(partial(f.expr, k), partial(h.expr, k))
                    for k in range(1, m + 1)))
    else:
        ginv = f.metric.inverse_entries()
        out = add(*(mul(ginv[i][j], partial(f.expr, i + 1), partial(h.expr, j + 1))
                    for i in range(m) for j in range(m)))
    return simplify(out, f.domain)


def iterate_tension(f, p):
    """tau^p: p-fold tension with normalization between iterations."""
    if p < 1:
        raise PqmorphError("iteration count must be >= 1")
    e = f.expr
    for _ in range(p):
        e = tension(f.with_expr(e))
    return e


def tension_of_composition(partials, z):
    """Tension of F(z, conj z) by the first/second-order chain rule.

    ``partials`` maps (j, k) to d^{j+k}F/dz^j dzbar^k, already composed with
    z (expressions on the chart).  All five entries up to second order are
    required.
    """
    need = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    for key in need:
        if key not in partials:
            raise MissingPartial(f"partial {key} not supplied")
    zb = conj_function(z)
    t, tb = tension(z), tension(zb)
    kzz = kappa(z, z)
    kzzb = kappa(z, zb)
    kzbzb = kappa(zb, zb)
    out = add(
        mul(partials[(1, 0)], t),
        mul(partials[(0, 1)], tb),
        mul(partials[(2, 0)], kzz),
        mul(const(2), partials[(1, 1)], kzzb),
        mul(partials[(0, 2)], kzbzb),
    )
    return simplify(out, z.domain)
