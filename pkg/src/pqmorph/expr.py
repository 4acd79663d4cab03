"""Immutable expression IR with hash consing and a light canonical form.

Every node is interned: building the same expression twice returns the same
object, so structural equality is plain ``is`` and subterm sharing is
automatic.  The smart constructors (:func:`add`, :func:`mul`, :func:`pow_`,
:func:`prim`) keep nodes canonical on construction: sums and products are
flattened, constants folded, like terms and like bases collected, and
children deterministically ordered.  ``Power`` exponents are rational and
``sqrt`` is represented as exponent 1/2.  Constants are exact complex
rationals, so a literal zero really is zero.

The heavier rational-function normalization (common denominators, expansion,
guard-aware radical rules) lives in :mod:`pqmorph.simplify`.
"""

from __future__ import annotations

import cmath
import threading
from fractions import Fraction

from .errors import ExpressionBudgetExceeded, PqmorphError

__all__ = [
    "CRat", "Expr", "Const", "Var", "Sum", "Product", "Power", "Prim",
    "const", "var", "add", "mul", "sub", "neg", "div", "pow_", "prim",
    "sqrt", "exp", "log", "sin", "cos", "acos",
    "ZERO", "ONE", "I", "conjugate", "substitute", "evaluate",
    "expression_budget", "node_count", "free_vars",
]

_ZERO_F = Fraction(0)
_ONE_F = Fraction(1)


class CRat:
    """Complex number with exact rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    def __add__(self, other):
        return CRat(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return CRat(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return CRat(-self.re, -self.im)

    def __mul__(self, other):
        return CRat(self.re * other.re - self.im * other.im,
                    self.re * other.im + self.im * other.re)

    def inv(self):
        n = self.re * self.re + self.im * self.im
        if n == 0:
            raise ZeroDivisionError("division by zero constant")
        return CRat(self.re / n, -self.im / n)

    def __truediv__(self, other):
        return self * other.inv()

    def conj(self):
        return CRat(self.re, -self.im)

    def pow_int(self, n):
        if n < 0:
            return self.inv().pow_int(-n)
        out = CRat(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    @property
    def is_zero(self):
        return self.re == 0 and self.im == 0

    @property
    def is_one(self):
        return self.re == 1 and self.im == 0

    @property
    def is_real(self):
        return self.im == 0

    def __complex__(self):
        return complex(self.re, self.im)

    def __eq__(self, other):
        return isinstance(other, CRat) and self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __repr__(self):
        if self.im == 0:
            return str(self.re)
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


CR_ZERO = CRat(0)
CR_ONE = CRat(1)
CR_I = CRat(0, 1)


# ---------------------------------------------------------------------------
# Node classes
# ---------------------------------------------------------------------------

class Expr:
    __slots__ = ("_skey", "_maxvar", "__weakref__")

    # identity-based __eq__/__hash__: interning makes structural equality
    # coincide with object identity.

    def __repr__(self):
        from .parse import format_expr
        return format_expr(self)

    @property
    def sort_key(self):
        k = self._skey
        if k is None:
            k = self._make_key()
            self._skey = k
        return k

    @property
    def max_var(self):
        m = self._maxvar
        if m is None:
            m = self._compute_maxvar()
            self._maxvar = m
        return m

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, q):
        return pow_(self, q)

    def __neg__(self):
        return neg(self)


def _coerce(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return const(x)
    if isinstance(x, CRat):
        return const(x)
    raise TypeError(f"cannot coerce {x!r} to Expr")


class Const(Expr):
    __slots__ = ("value",)

    def _make_key(self):
        v = self.value
        return (0, v.re.numerator, v.re.denominator, v.im.numerator, v.im.denominator)

    def _compute_maxvar(self):
        return 0


class Var(Expr):
    __slots__ = ("index",)

    def _make_key(self):
        return (1, self.index)

    def _compute_maxvar(self):
        return self.index


_PRIM_NAMES = ("log", "exp", "sin", "cos", "acos")


class Prim(Expr):
    __slots__ = ("name", "arg")

    def _make_key(self):
        return (2, _PRIM_NAMES.index(self.name), self.arg.sort_key)

    def _compute_maxvar(self):
        return self.arg.max_var


class Power(Expr):
    __slots__ = ("base", "exponent")

    def _make_key(self):
        q = self.exponent
        return (3, self.base.sort_key, q.numerator, q.denominator)

    def _compute_maxvar(self):
        return self.base.max_var


class Product(Expr):
    __slots__ = ("factors",)

    def _make_key(self):
        return (4, len(self.factors)) + tuple(f.sort_key for f in self.factors)

    def _compute_maxvar(self):
        return max(f.max_var for f in self.factors)


class Sum(Expr):
    __slots__ = ("terms",)

    def _make_key(self):
        return (5, len(self.terms)) + tuple(t.sort_key for t in self.terms)

    def _compute_maxvar(self):
        return max(t.max_var for t in self.terms)


# ---------------------------------------------------------------------------
# Interning
# ---------------------------------------------------------------------------

_INTERN: dict = {}
_INTERN_LOCK = threading.Lock()
_BUDGET = [5_000_000]


class expression_budget:
    """Context manager overriding the global node budget."""

    def __init__(self, nodes):
        self.nodes = nodes
        self._saved = None

    def __enter__(self):
        self._saved = _BUDGET[0]
        _BUDGET[0] = self.nodes
        return self

    def __exit__(self, *exc):
        _BUDGET[0] = self._saved
        return False


def node_count():
    """Number of distinct interned nodes alive in this process."""
    return len(_INTERN)


def _intern(key, build):
    node = _INTERN.get(key)
    if node is not None:
        return node
    if len(_INTERN) >= _BUDGET[0]:
        raise ExpressionBudgetExceeded(
            f"expression node budget of {_BUDGET[0]} exceeded")
    node = build()
    node._skey = None
    node._maxvar = None
    # setdefault keeps interning race-free under concurrent construction
    return _INTERN.setdefault(key, node)


def const(value, im=0):
    if isinstance(value, CRat):
        c = value
    else:
        c = CRat(value, im)
    key = ("c", c.re, c.im)
    def build():
        n = Const.__new__(Const)
        n.value = c
        return n
    return _intern(key, build)


ZERO = const(0)
ONE = const(1)
MINUS_ONE = const(-1)
I = const(0, 1)


def var(index):
    if not isinstance(index, int) or index < 1:
        raise PqmorphError(f"variable index must be a positive integer, got {index}")
    key = ("v", index)
    def build():
        n = Var.__new__(Var)
        n.index = index
        return n
    return _intern(key, build)


def _mk_sum(terms):
    key = ("s",) + tuple(terms)
    def build():
        n = Sum.__new__(Sum)
        n.terms = tuple(terms)
        return n
    return _intern(key, build)


def _mk_product(factors):
    key = ("p",) + tuple(factors)
    def build():
        n = Product.__new__(Product)
        n.factors = tuple(factors)
        return n
    return _intern(key, build)


def _mk_power(base, q):
    key = ("^", base, q)
    def build():
        n = Power.__new__(Power)
        n.base = base
        n.exponent = q
        return n
    return _intern(key, build)


def _mk_prim(name, arg):
    key = ("f", name, arg)
    def build():
        n = Prim.__new__(Prim)
        n.name = name
        n.arg = arg
        return n
    return _intern(key, build)


# ---------------------------------------------------------------------------
# Term/factor decomposition helpers
# ---------------------------------------------------------------------------

def coeff_split(e):
    """Split a term into (rational coefficient, monomial part or None)."""
    if isinstance(e, Const):
        return e.value, None
    if isinstance(e, Product):
        f0 = e.factors[0]
        if isinstance(f0, Const):
            rest = e.factors[1:]
            return f0.value, rest[0] if len(rest) == 1 else _mk_product(list(rest))
    return CR_ONE, e


def base_split(e):
    """Split a factor into (base, rational exponent)."""
    if isinstance(e, Power):
        return e.base, e.exponent
    return e, _ONE_F


# ---------------------------------------------------------------------------
# Smart constructors
# ---------------------------------------------------------------------------

def add(*terms):
    flat = []
    csum = CR_ZERO
    stack = list(reversed(terms))
    while stack:
        t = stack.pop()
        if isinstance(t, Sum):
            stack.extend(reversed(t.terms))
        elif isinstance(t, Const):
            csum = csum + t.value
        else:
            flat.append(t)
    # collect like terms keyed by monomial part
    by_monom: dict = {}
    order: list = []
    for t in flat:
        c, monom = coeff_split(t)
        if monom is None:
            csum = csum + c
            continue
        if monom in by_monom:
            by_monom[monom] = by_monom[monom] + c
        else:
            by_monom[monom] = c
            order.append(monom)
    out = []
    for monom in order:
        c = by_monom[monom]
        if c.is_zero:
            continue
        out.append(monom if c.is_one else _scaled(c, monom))
    out.sort(key=lambda t: t.sort_key)
    if not csum.is_zero:
        out.insert(0, const(csum))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return _mk_sum(out)


def _scaled(c, monom):
    """c * monom with c a nonzero, non-one constant and monom canonical."""
    if isinstance(monom, Product):
        f0 = monom.factors[0]
        if isinstance(f0, Const):
            c = c * f0.value
            rest = list(monom.factors[1:])
            if c.is_one:
                return rest[0] if len(rest) == 1 else _mk_product(rest)
            return _mk_product([const(c)] + rest)
        return _mk_product([const(c)] + list(monom.factors))
    return _mk_product([const(c), monom])


def mul(*factors):
    flat = []
    coeff = CR_ONE
    stack = list(reversed(factors))
    while stack:
        f = stack.pop()
        if isinstance(f, Product):
            stack.extend(reversed(f.factors))
        elif isinstance(f, Const):
            coeff = coeff * f.value
        else:
            flat.append(f)
    if coeff.is_zero:
        return ZERO
    # merge equal bases by adding exponents
    by_base: dict = {}
    order: list = []
    for f in flat:
        b, q = base_split(f)
        if b in by_base:
            by_base[b] = by_base[b] + q
        else:
            by_base[b] = q
            order.append(b)
    out = []
    redo = []
    for b in order:
        q = by_base[b]
        if q == 0:
            continue
        f = pow_(b, q)
        if isinstance(f, Const):
            coeff = coeff * f.value
        elif isinstance(f, Product):
            # pow_ restructured (e.g. distributed an integer power); reprocess
            redo.append(f)
        else:
            out.append(f)
    if redo:
        return mul(const(coeff), *(out + redo))
    if coeff.is_zero:
        return ZERO
    if len({base_split(f)[0] for f in out}) < len(out):
        # a pow_ rewrite exposed a shared base; collect again
        return mul(const(coeff), *out)
    out.sort(key=lambda f: f.sort_key)
    if not coeff.is_one:
        out.insert(0, const(coeff))
    if not out:
        return ONE
    if len(out) == 1:
        return out[0]
    return _mk_product(out)


def _rat_root(fr, n):
    """Exact n-th root of a nonnegative Fraction, or None."""
    def iroot(k):
        if k < 0:
            return None
        r = round(k ** (1.0 / n)) if k > 0 else 0
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand ** n == k:
                return cand
        return None
    a = iroot(fr.numerator)
    if a is None:
        return None
    b = iroot(fr.denominator)
    if b is None:
        return None
    return Fraction(a, b)


def _const_pow(c, q):
    """Exact c**q for CRat c and Fraction q, or None if not representable."""
    if q.denominator == 1:
        if c.is_zero and q < 0:
            raise ZeroDivisionError("0 raised to a negative power")
        return c.pow_int(q.numerator)
    if c.is_zero:
        if q > 0:
            return CR_ZERO
        raise ZeroDivisionError("0 raised to a negative power")
    if c.is_real and c.re > 0:
        root = _rat_root(c.re, q.denominator)
        if root is not None:
            return CRat(root).pow_int(q.numerator)
    return None


def pow_(base, exponent):
    if isinstance(exponent, int):
        q = Fraction(exponent)
    elif isinstance(exponent, Fraction):
        q = exponent
    else:
        raise PqmorphError(f"exponent must be rational, got {exponent!r}")
    if q == 0:
        return ONE
    if q == 1:
        return base
    if isinstance(base, Const):
        folded = _const_pow(base.value, q)
        if folded is not None:
            return const(folded)
        return _mk_power(base, q)
    if isinstance(base, Power):
        # (b^a)^q -> b^(aq) when q is an integer, or when |a| <= 1 so the
        # principal-branch argument stays inside (-pi, pi].
        a = base.exponent
        if q.denominator == 1 or (-1 <= a <= 1):
            return pow_(base.base, a * q)
        return _mk_power(base, q)
    if isinstance(base, Product):
        if q.denominator == 1:
            return mul(*(pow_(f, q) for f in base.factors))
        f0 = base.factors[0]
        if isinstance(f0, Const) and f0.value.is_real and f0.value.re > 0:
            # peel a positive real coefficient: (c*rest)^q = c^q * rest^q
            rest = list(base.factors[1:])
            rest_e = rest[0] if len(rest) == 1 else _mk_product(rest)
            c = f0.value
            folded = _const_pow(c, q)
            cpart = const(folded) if folded is not None else _mk_power(const(c), q)
            return mul(cpart, pow_(rest_e, q))
        return _mk_power(base, q)
    if isinstance(base, Sum):
        # normalize the content so proportional sums share one power base
        lead = base.terms[0]
        c0, _ = coeff_split(lead)
        if not c0.is_one:
            inv = c0.inv()
            prim_sum = add(*(_apply_coeff(inv, t) for t in base.terms))
            return pow_(mul(const(c0), prim_sum), q)
    return _mk_power(base, q)


def _apply_coeff(c, term):
    tc, monom = coeff_split(term)
    v = c * tc
    if monom is None:
        return const(v)
    if v.is_one:
        return monom
    return _scaled(v, monom)


def prim(name, arg):
    if name == "sqrt":
        return pow_(arg, Fraction(1, 2))
    if name not in _PRIM_NAMES:
        raise PqmorphError(f"unknown primitive {name!r}")
    if name == "log":
        if arg is ONE:
            return ZERO
        if isinstance(arg, Power) and 0 < arg.exponent <= 1:
            # log(b^q) = q*log(b) is branch-safe for 0 < q <= 1
            return mul(const(CRat(arg.exponent)), prim("log", arg.base))
    elif name == "exp":
        if arg is ZERO:
            return ONE
        ex = _split_exp_logs(arg)
        if ex is not None:
            return ex
    elif name == "sin":
        if arg is ZERO:
            return ZERO
        s, a = _strip_sign(arg)
        if s < 0:
            return neg(_mk_prim("sin", a))
        arg = a
    elif name == "cos":
        if arg is ZERO:
            return ONE
        _, arg = _strip_sign(arg)
        if isinstance(arg, Prim) and arg.name == "acos":
            return arg.arg
    elif name == "acos":
        if arg is ONE:
            return ZERO
    return _mk_prim(name, arg)


def _strip_sign(e):
    """Pull a leading -1 out of a term, for odd/even trig normalization."""
    c, monom = coeff_split(e)
    if monom is not None and (c.re < 0 or (c.re == 0 and c.im < 0)):
        return -1, _apply_coeff(CRat(-1), e)
    return 1, e


def _split_exp_logs(arg):
    """exp(q*log(u) + rest) -> u^q * exp(rest); None if no log term."""
    terms = arg.terms if isinstance(arg, Sum) else (arg,)
    logs, rest = [], []
    for t in terms:
        c, monom = coeff_split(t)
        if isinstance(monom, Prim) and monom.name == "log" and c.is_real:
            logs.append((monom.arg, Fraction(c.re)))
        else:
            rest.append(t)
    if not logs:
        return None
    parts = [pow_(u, q) for u, q in logs]
    if rest:
        parts.append(_mk_prim("exp", add(*rest)) if add(*rest) is not ZERO else ONE)
    return mul(*parts)


def sub(a, b):
    return add(a, neg(b))


def neg(e):
    return mul(MINUS_ONE, e)


def div(a, b):
    return mul(a, pow_(b, -1))


def sqrt(e):
    return pow_(e, Fraction(1, 2))


def exp(e):
    return prim("exp", e)


def log(e):
    return prim("log", e)


def sin(e):
    return prim("sin", e)


def cos(e):
    return prim("cos", e)


def acos(e):
    return prim("acos", e)


# ---------------------------------------------------------------------------
# Structure-walking operations
# ---------------------------------------------------------------------------

_CONJ_MEMO: dict = {}


def conjugate(e):
    """Complex conjugate: negates imaginary parts of constants.

    Variables are real-valued and every primitive commutes with conjugation
    on its principal branch, so the tree structure is preserved.
    """
    out = _CONJ_MEMO.get(e)
    if out is not None:
        return out
    if isinstance(e, Const):
        out = const(e.value.conj())
    elif isinstance(e, Var):
        out = e
    elif isinstance(e, Sum):
        out = add(*(conjugate(t) for t in e.terms))
    elif isinstance(e, Product):
        out = mul(*(conjugate(f) for f in e.factors))
    elif isinstance(e, Power):
        out = pow_(conjugate(e.base), e.exponent)
    else:
        out = prim(e.name, conjugate(e.arg))
    _CONJ_MEMO[e] = out
    _CONJ_MEMO[out] = e
    return out


def substitute(e, mapping, _memo=None):
    """Replace variables by expressions; mapping is {index: Expr}."""
    if _memo is None:
        _memo = {}
    out = _memo.get(e)
    if out is not None:
        return out
    if isinstance(e, Const):
        out = e
    elif isinstance(e, Var):
        out = mapping.get(e.index, e)
    elif isinstance(e, Sum):
        out = add(*(substitute(t, mapping, _memo) for t in e.terms))
    elif isinstance(e, Product):
        out = mul(*(substitute(f, mapping, _memo) for f in e.factors))
    elif isinstance(e, Power):
        out = pow_(substitute(e.base, mapping, _memo), e.exponent)
    else:
        out = prim(e.name, substitute(e.arg, mapping, _memo))
    _memo[e] = out
    return out


def shift_vars(e, offset):
    """Re-index every variable x_k to x_{k+offset}."""
    if offset == 0:
        return e
    mapping = {k: var(k + offset) for k in range(1, e.max_var + 1)}
    return substitute(e, mapping)


def free_vars(e, out=None):
    """Set of variable indices appearing in e."""
    if out is None:
        out = set()
    stack = [e]
    seen = set()
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        if isinstance(n, Var):
            out.add(n.index)
        elif isinstance(n, Sum):
            stack.extend(n.terms)
        elif isinstance(n, Product):
            stack.extend(n.factors)
        elif isinstance(n, Power):
            stack.append(n.base)
        elif isinstance(n, Prim):
            stack.append(n.arg)
    return out


# ---------------------------------------------------------------------------
# Direct numeric evaluation (order-0 path of the numeric oracle)
# ---------------------------------------------------------------------------

def evaluate(e, point):
    """Evaluate at a real point; returns (value, scale).

    ``scale`` is the largest magnitude of any additive term encountered, so
    callers can judge residuals relative to the cancellation that produced
    them.  Principal branches are used for fractional powers and log.
    """
    memo = {}

    def ev(n):
        got = memo.get(n)
        if got is not None:
            return got
        if isinstance(n, Const):
            r = (complex(n.value), abs(complex(n.value)))
        elif isinstance(n, Var):
            v = complex(point[n.index - 1])
            r = (v, abs(v))
        elif isinstance(n, Sum):
            vals = [ev(t) for t in n.terms]
            v = sum(x for x, _ in vals)
            r = (v, max(max(s for _, s in vals), max(abs(x) for x, _ in vals)))
        elif isinstance(n, Product):
            v, s = complex(1), 0.0
            for f in n.factors:
                fv, fs = ev(f)
                v *= fv
                s = max(s, fs)
            r = (v, max(s, abs(v)))
        elif isinstance(n, Power):
            bv, bs = ev(n.base)
            q = n.exponent
            if q.denominator == 1:
                v = bv ** q.numerator
            else:
                v = cmath.exp(float(q) * cmath.log(bv)) if bv != 0 else complex(0)
            r = (v, max(bs, abs(v)))
        else:
            av, as_ = ev(n.arg)
            fn = {"log": cmath.log, "exp": cmath.exp, "sin": cmath.sin,
                  "cos": cmath.cos, "acos": cmath.acos}[n.name]
            v = fn(av)
            r = (v, max(as_, abs(v)))
        memo[n] = r
        return r

    return ev(e)
