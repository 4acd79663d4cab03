"""Rational-function normalization over a common denominator.

:func:`simplify` rewrites an expression into a normal form: a fully expanded
numerator polynomial over a product of polynomial denominators, with atoms
being variables, primitives and fractional powers.  Exponents of equal bases
are added exactly, integer powers of sums are expanded, and negative integer
powers of sums are cleared into the denominator, so cancellations like
``sqrt(u)*sqrt(u) - u`` or ``(x1^2+x2^2)/s - 1`` collapse to the literal
zero.  ``cos(u)^2`` is eliminated via ``1 - sin(u)^2`` which makes the
Pythagorean identity cancel by collection.

Rules that are only valid on a restricted domain (distributing a fractional
power over a product, ``log(exp(u)) -> u``) fire only when a small
structural positivity/realness oracle, fed by the domain guards, certifies
the operands.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ExpressionBudgetExceeded
from .expr import (
    CRat, CR_ONE, Const, Var, Sum, Product, Power, Prim, ZERO, ONE,
    add, mul, pow_, prim, const, base_split, coeff_split,
)

__all__ = ["simplify", "is_positive", "is_real", "set_term_cap"]

_TERM_CAP = [200_000]


def set_term_cap(n):
    """Set the polynomial term budget for normalization; returns the old cap."""
    old = _TERM_CAP[0]
    _TERM_CAP[0] = n
    return old


# ---------------------------------------------------------------------------
# Positivity / realness oracle
# ---------------------------------------------------------------------------

def is_real(e, facts=frozenset()):
    if isinstance(e, Const):
        return e.value.is_real
    if isinstance(e, Var):
        return True
    if isinstance(e, Sum):
        return all(is_real(t, facts) for t in e.terms)
    if isinstance(e, Product):
        return all(is_real(f, facts) for f in e.factors)
    if isinstance(e, Power):
        q = e.exponent
        if q.denominator == 1 and is_real(e.base, facts):
            return True
        return is_positive(e.base, facts) or (q > 0 and is_nonneg(e.base, facts))
    if isinstance(e, Prim):
        if e.name == "log":
            return is_positive(e.arg, facts)
        if e.name in ("exp", "sin", "cos"):
            return is_real(e.arg, facts)
    return False


def is_nonneg(e, facts=frozenset()):
    if isinstance(e, Const):
        return e.value.is_real and e.value.re >= 0
    if e in facts:
        return True
    if isinstance(e, Sum):
        return all(is_nonneg(t, facts) for t in e.terms)
    if isinstance(e, Product):
        return all(is_nonneg(f, facts) for f in e.factors)
    if isinstance(e, Power):
        q = e.exponent
        if q.denominator == 1 and q.numerator % 2 == 0 and is_real(e.base, facts):
            return True
        return is_nonneg(e.base, facts)
    if isinstance(e, Prim) and e.name == "exp":
        return is_real(e.arg, facts)
    return False


def is_positive(e, facts=frozenset()):
    if isinstance(e, Const):
        return e.value.is_real and e.value.re > 0
    if e in facts:
        return True
    if isinstance(e, Sum):
        return (all(is_nonneg(t, facts) for t in e.terms)
                and any(is_positive(t, facts) for t in e.terms))
    if isinstance(e, Product):
        return all(is_positive(f, facts) for f in e.factors)
    if isinstance(e, Power):
        return is_positive(e.base, facts)
    if isinstance(e, Prim) and e.name == "exp":
        return is_real(e.arg, facts)
    return False


# ---------------------------------------------------------------------------
# Term maps: {monomial: coefficient} with monomial = ((base, exponent), ...)
# ---------------------------------------------------------------------------

_EMPTY_MONO = ()


def _mono_mul(a, b):
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        ba, qa = a[i]
        bb, qb = b[j]
        ka, kb = ba.sort_key, bb.sort_key
        if ba is bb:
            q = qa + qb
            if q != 0:
                out.append((ba, q))
            i += 1
            j += 1
        elif ka < kb:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def _map_add(acc, other, scale=CR_ONE):
    for m, c in other.items():
        v = acc.get(m)
        c = c * scale if scale is not CR_ONE else c
        if v is None:
            acc[m] = c
        else:
            v = v + c
            if v.is_zero:
                del acc[m]
            else:
                acc[m] = v


def _map_mul(a, b):
    if len(a) > len(b):
        a, b = b, a
    out = {}
    cap = _TERM_CAP[0]
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = _mono_mul(ma, mb)
            c = ca * cb
            v = out.get(m)
            if v is None:
                out[m] = c
            else:
                v = v + c
                if v.is_zero:
                    del out[m]
                else:
                    out[m] = v
        if len(out) > cap:
            raise ExpressionBudgetExceeded(
                f"normalization exceeded {cap} polynomial terms")
    return out


def _map_pow(a, n):
    out = {_EMPTY_MONO: CR_ONE}
    base = a
    while n:
        if n & 1:
            out = _map_mul(out, base)
        base = _map_mul(base, base) if n > 1 else base
        n >>= 1
    return out


def _mono_atom(b, q=Fraction(1)):
    return {((b, q),): CR_ONE}


# ---------------------------------------------------------------------------
# Normalization pipeline
# ---------------------------------------------------------------------------

_SIMP_MEMO: dict = {}


def simplify(e, domain=None):
    """Return the normalized form of ``e``; idempotent.

    ``domain`` contributes positivity facts from its ``> 0`` guards, enabling
    branch-sensitive rewrites.  Unknown patterns pass through unrewritten.
    """
    facts = domain.positive_facts() if domain is not None else frozenset()
    return _simplify(e, facts)


def _simplify(e, facts):
    key = (e, facts)
    got = _SIMP_MEMO.get(key)
    if got is not None:
        return got
    tm = _to_terms(e, facts)
    out = _rebuild(tm, facts)
    _SIMP_MEMO[key] = out
    return out


def _to_terms(e, facts):
    if isinstance(e, Const):
        return {} if e.value.is_zero else {_EMPTY_MONO: e.value}
    if isinstance(e, Var):
        return _mono_atom(e)
    if isinstance(e, Sum):
        acc = {}
        for t in e.terms:
            _map_add(acc, _to_terms(t, facts))
        return acc
    if isinstance(e, Product):
        acc = {_EMPTY_MONO: CR_ONE}
        for f in e.factors:
            acc = _map_mul(acc, _to_terms(f, facts))
        return acc
    if isinstance(e, Power):
        bh = _simplify(e.base, facts)
        return _frac_power(bh, e.exponent, facts)
    # Prim
    a = _simplify(e.arg, facts)
    node = prim(e.name, a)
    if isinstance(node, Prim):
        if node.name == "log":
            if (isinstance(node.arg, Prim) and node.arg.name == "exp"
                    and is_real(node.arg.arg, facts)):
                return _to_terms(node.arg.arg, facts)
            split = _log_of_positive(node.arg, facts)
            if split is not None:
                return _to_terms(split, facts)
        return _mono_atom(node)
    return _to_terms(node, facts)


def _log_of_positive(arg, facts):
    """log of powers/products of certified-positive factors, split apart.

    Valid because every factor has argument 0: log(a*b) = log a + log b and
    log(a^q) = q log a whenever a, b > 0.
    """
    from .expr import add, const
    if isinstance(arg, Power) and is_positive(arg.base, facts):
        q = arg.exponent
        return mul(const(CRat(q)), prim("log", arg.base))
    if isinstance(arg, Product):
        parts = []
        for f in arg.factors:
            fb, fq = base_split(f)
            if not is_positive(fb, facts):
                return None
            if fq == 1:
                parts.append(prim("log", fb))
            else:
                parts.append(mul(const(CRat(fq)), prim("log", fb)))
        return add(*parts)
    return None


def _frac_power(bh, q, facts):
    """Term map of bh**q for heavy-canonical bh and rational q."""
    if q == 0:
        return {_EMPTY_MONO: CR_ONE}
    if isinstance(bh, Const):
        node = pow_(bh, q)
        if isinstance(node, Const):
            return {} if node.value.is_zero else {_EMPTY_MONO: node.value}
        return _mono_atom(node)
    if isinstance(bh, Product):
        if q.denominator == 1:
            acc = {_EMPTY_MONO: CR_ONE}
            for f in bh.factors:
                fb, fq = base_split(f)
                acc = _map_mul(acc, _frac_power(fb, fq * q, facts))
            return acc
        # fractional: distribute over certified-positive factors only
        safe, rest = [], []
        for f in bh.factors:
            fb, fq = base_split(f)
            if isinstance(fb, Const) and fb.value.is_real and fb.value.re > 0:
                safe.append((fb, fq))
            elif is_positive(fb, facts):
                safe.append((fb, fq))
            else:
                rest.append(f)
        if safe:
            acc = {_EMPTY_MONO: CR_ONE}
            for fb, fq in safe:
                acc = _map_mul(acc, _frac_power(fb, fq * q, facts))
            if rest:
                rest_e = rest[0] if len(rest) == 1 else mul(*rest)
                acc = _map_mul(acc, _frac_power(rest_e, q, facts))
            return acc
        return _opaque_power(bh, q)
    if isinstance(bh, Sum):
        if q.denominator == 1 and q > 0:
            return _map_pow(_to_terms(bh, facts), q.numerator)
        return _opaque_power(bh, q)
    if isinstance(bh, Power):
        nb, na = bh.base, bh.exponent
        if q.denominator == 1 or (-1 <= na <= 1):
            return _frac_power(nb, na * q, facts)
        return _mono_atom(bh, q)
    # Var or Prim atom: Laurent exponents are fine
    return _mono_atom(bh, q)


def _opaque_power(b, q):
    """Keep b**q as an atomic factor, content-normalized through pow_."""
    node = pow_(b, q)
    if isinstance(node, Const):
        return {} if node.value.is_zero else {_EMPTY_MONO: node.value}
    if isinstance(node, Power):
        return _mono_atom(node.base, node.exponent)
    if isinstance(node, Product):
        acc = {_EMPTY_MONO: CR_ONE}
        for f in node.factors:
            if isinstance(f, Const):
                acc = _map_mul(acc, {_EMPTY_MONO: f.value})
            else:
                fb, fq = base_split(f)
                acc = _map_mul(acc, _mono_atom(fb, fq))
        return acc
    return _mono_atom(node)


def _eliminate_cos_squares(tm, facts):
    """Rewrite cos(u)^k (k >= 2) to (1 - sin(u)^2)^(k//2) * cos(u)^(k mod 2)."""
    target = None
    for mono in tm:
        for b, q in mono:
            if (isinstance(b, Prim) and b.name == "cos"
                    and q.denominator == 1 and q >= 2):
                target = (mono, b, q)
                break
        if target:
            break
    if target is None:
        return tm, False
    out = {}
    for mono, c in tm.items():
        parts = {_EMPTY_MONO: c}
        keep = []
        for b, q in mono:
            if (isinstance(b, Prim) and b.name == "cos"
                    and q.denominator == 1 and q >= 2):
                k = q.numerator
                s = prim("sin", b.arg)
                pyth = {_EMPTY_MONO: CR_ONE, ((s, Fraction(2)),): CRat(-1)}
                parts = _map_mul(parts, _map_pow(pyth, k // 2))
                if k % 2:
                    keep.append((b, Fraction(1)))
            else:
                keep.append((b, q))
        keep_mono = tuple(keep)
        for m2, c2 in parts.items():
            m = _mono_mul(keep_mono, m2)
            v = out.get(m)
            v = c2 if v is None else v + c2
            if v.is_zero:
                out.pop(m, None)
            else:
                out[m] = v
    return out, True


def _clear_denominators(tm, facts):
    """Expand integer powers of sums; move negative ones into a denominator.

    Returns (numerator map, {sum_base: positive exponent}).
    """
    denom = {}
    for _round in range(20):
        # find needed clearing exponents and whether any expansion is pending
        need = {}
        pending = False
        for mono in tm:
            for b, q in mono:
                if isinstance(b, Sum):
                    n = q.numerator // q.denominator  # floor
                    if n != 0:
                        pending = True
                    if n < 0:
                        need[b] = max(need.get(b, 0), -n)
        if not need and not pending:
            return tm, denom
        for b, k in need.items():
            denom[b] = denom.get(b, 0) + k
        out = {}
        cap = _TERM_CAP[0]
        for mono, c in tm.items():
            keep = []
            expand = {_EMPTY_MONO: c}
            for b, q in mono:
                if isinstance(b, Sum):
                    n = q.numerator // q.denominator
                    f = q - n
                    n += need.get(b, 0)
                    if f != 0:
                        keep.append((b, f))
                    if n > 0:
                        expand = _map_mul(expand, _map_pow(_to_terms(b, facts), n))
                    elif n < 0:
                        raise AssertionError("clearing left a negative power")
                else:
                    keep.append((b, q))
            # terms without b still need the common-denominator factors
            for b, k in need.items():
                have = any(bb is b for bb, _ in mono)
                if not have:
                    expand = _map_mul(expand, _map_pow(_to_terms(b, facts), k))
            keep.sort(key=lambda bq: bq[0].sort_key)
            keep_mono = tuple(keep)
            for m2, c2 in expand.items():
                m = _mono_mul(keep_mono, m2)
                v = out.get(m)
                v = c2 if v is None else v + c2
                if v.is_zero:
                    out.pop(m, None)
                else:
                    out[m] = v
            if len(out) > cap:
                raise ExpressionBudgetExceeded(
                    f"normalization exceeded {cap} polynomial terms")
        tm = out
    raise ExpressionBudgetExceeded("denominator clearing did not stabilize")


def _var_poly_split(mono):
    """Split a monomial into (var part, atom part).

    The var part is usable for polynomial division only when every variable
    exponent is a nonnegative integer; returns None for it otherwise.
    """
    vpart, apart = [], []
    ok = True
    for b, q in mono:
        if isinstance(b, Var):
            if q.denominator == 1 and q > 0:
                vpart.append((b.index, q.numerator))
            else:
                ok = False
                apart.append((b, q))
        else:
            apart.append((b, q))
    return (tuple(vpart) if ok else None), tuple(apart)


def _dense(vmono, width):
    v = [0] * width
    for idx, e in vmono:
        v[idx - 1] = e
    return tuple(v)


def _grlex(dv):
    return (sum(dv), dv)


def _dense_divide(a, b):
    out = tuple(x - y for x, y in zip(a, b))
    return out if all(x >= 0 for x in out) else None


def _dense_mul(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _try_divide_group(poly, bpoly, blead, blead_c):
    """Exact division of {dense vmono: coeff} by the divisor, or None."""
    rem = dict(poly)
    quo = {}
    cap = len(poly) * (len(bpoly) + 2) + 16
    steps = 0
    while rem:
        lead = max(rem, key=_grlex)
        t = _dense_divide(lead, blead)
        if t is None:
            return None
        c = rem[lead] / blead_c
        quo[t] = c
        for bm, bc in bpoly.items():
            m = _dense_mul(t, bm)
            v = rem.get(m)
            v = (v if v is not None else CRat(0)) - c * bc
            if v.is_zero:
                rem.pop(m, None)
            else:
                rem[m] = v
        steps += 1
        if steps > cap:
            return None
    return quo


def _reduce_by_denominators(tm, denom, facts):
    """Cancel denominator bases that divide the numerator exactly."""
    for B in sorted(denom, key=lambda b: b.sort_key):
        width = B.max_var
        bterms = _to_terms(B, facts)
        bpoly = {}
        pure = True
        for mono, c in bterms.items():
            v, a = _var_poly_split(mono)
            if v is None or a or any(idx > width for idx, _ in v):
                pure = False
                break
            bpoly[_dense(v, width)] = c
        if not pure or not bpoly:
            continue
        blead = max(bpoly, key=_grlex)
        blead_c = bpoly[blead]
        while denom.get(B, 0) > 0:
            groups = {}
            ok = True
            for mono, c in tm.items():
                v, a = _var_poly_split(mono)
                if v is None:
                    ok = False
                    break
                head = tuple((i, e) for i, e in v if i <= width)
                tail = tuple((_var(i), Fraction(e)) for i, e in v if i > width)
                groups.setdefault((a, tail), {})[_dense(head, width)] = c
            if not ok:
                break
            new_groups = {}
            for key, poly in groups.items():
                q = _try_divide_group(poly, bpoly, blead, blead_c)
                if q is None:
                    new_groups = None
                    break
                new_groups[key] = q
            if new_groups is None:
                break
            out = {}
            for (a, tail), poly in new_groups.items():
                for dv, c in poly.items():
                    vfac = tuple((_var(i + 1), Fraction(e))
                                 for i, e in enumerate(dv) if e)
                    mono = tuple(sorted(vfac + tail + a,
                                        key=lambda bq: bq[0].sort_key))
                    out[mono] = c
            tm = out
            denom[B] -= 1
        if denom.get(B, 0) == 0:
            denom.pop(B, None)
    return tm, denom


def _var(idx):
    from .expr import var
    return var(idx)


def _rebuild(tm, facts):
    changed = True
    while changed:
        tm, changed = _eliminate_cos_squares(tm, facts)
    tm, denom = _clear_denominators(tm, facts)
    changed = True
    while changed:
        tm, changed = _eliminate_cos_squares(tm, facts)
        if changed:
            tm, d2 = _clear_denominators(tm, facts)
            for b, k in d2.items():
                denom[b] = denom.get(b, 0) + k
    if denom and tm:
        tm, denom = _reduce_by_denominators(tm, denom, facts)
    if not tm:
        return ZERO
    terms = []
    for mono in sorted(tm, key=_mono_key):
        c = tm[mono]
        factors = [pow_(b, q) for b, q in mono]
        if not c.is_one or not factors:
            factors.insert(0, const(c))
        terms.append(mul(*factors) if len(factors) > 1 else factors[0])
    num = add(*terms) if len(terms) > 1 else terms[0]
    if not denom:
        return num
    dens = [pow_(b, Fraction(-k)) for b, k in
            sorted(denom.items(), key=lambda bk: bk[0].sort_key)]
    return mul(num, *dens)


def _mono_key(mono):
    return tuple((b.sort_key, q) for b, q in mono)
