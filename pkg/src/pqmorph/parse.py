"""Text DSL for chart expressions: parser and deterministic formatter.

Grammar: variables ``x1..xm``, imaginary unit ``i``, integer literals
(rationals are written ``a/b``), infix ``+ - * / ^`` with the usual
precedence (``^`` right-associative, rational exponents only), functions
``sqrt log exp sin cos acos`` and the sugar ``abs2(k, l)`` for
``x_k^2 + ... + x_l^2``.  Whitespace insensitive; no implicit
multiplication.  ``parse(format(e))`` returns the identical node.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import PqmorphError, SyntaxErrorAt
from .expr import (
    Const, Var, Sum, Product, Power, Prim, CRat,
    add, mul, pow_, prim, const, var, neg, div, coeff_split,
)

__all__ = ["parse", "format_expr"]

_FUNCTIONS = ("sqrt", "log", "exp", "sin", "cos", "acos")


def _tokenize(s):
    toks = []
    n = len(s)
    pos = 0
    while pos < n:
        ch = s[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch.isdigit():
            start = pos
            while pos < n and s[pos].isdigit():
                pos += 1
            if pos < n and s[pos] == ".":
                raise SyntaxErrorAt("decimal literals are not supported; use a/b", pos)
            toks.append(("num", int(s[start:pos]), start))
            continue
        if ch.isalpha() or ch == "_":
            start = pos
            while pos < n and (s[pos].isalnum() or s[pos] == "_"):
                pos += 1
            toks.append(("name", s[start:pos], start))
            continue
        if ch in "+-*/^(),":
            toks.append((ch, ch, pos))
            pos += 1
            continue
        raise SyntaxErrorAt(f"unexpected character {ch!r}", pos)
    toks.append(("end", None, n))
    return toks


class _Parser:
    def __init__(self, tokens, dim):
        self.toks = tokens
        self.pos = 0
        self.dim = dim

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind):
        t = self.next()
        if t[0] != kind:
            raise SyntaxErrorAt(f"expected {kind!r}, found {t[1]!r}", t[2])
        return t

    def parse_expr(self, min_prec=0):
        lhs = self.parse_unary()
        while True:
            kind, _, off = self.peek()
            prec = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}.get(kind)
            if prec is None or prec < min_prec:
                return lhs
            self.next()
            if kind == "^":
                # right-associative, exponent must be a rational constant
                rhs = self.parse_expr(30)
                lhs = pow_(lhs, self._as_rational(rhs, off))
                continue
            rhs = self.parse_expr(prec + 1)
            if kind == "+":
                lhs = add(lhs, rhs)
            elif kind == "-":
                lhs = add(lhs, neg(rhs))
            elif kind == "*":
                lhs = mul(lhs, rhs)
            else:
                lhs = div(lhs, rhs)

    def _as_rational(self, e, off):
        if isinstance(e, Const) and e.value.is_real:
            return e.value.re
        raise SyntaxErrorAt("exponent must be a rational constant", off)

    def parse_unary(self):
        kind, _, _ = self.peek()
        if kind == "-":
            self.next()
            return neg(self.parse_unary())
        if kind == "+":
            self.next()
            return self.parse_unary()
        return self.parse_atom()

    def parse_atom(self):
        kind, val, off = self.next()
        if kind == "num":
            e = const(val)
        elif kind == "(":
            e = self.parse_expr()
            self.expect(")")
        elif kind == "name":
            e = self.parse_name(val, off)
        else:
            raise SyntaxErrorAt(f"unexpected token {val!r}", off)
        # tight binding of ^ after an atom
        while self.peek()[0] == "^":
            _, _, poff = self.next()
            rhs = self.parse_expr(30)
            e = pow_(e, self._as_rational(rhs, poff))
        return e

    def parse_name(self, name, off):
        if name == "i":
            return const(0, 1)
        if name in _FUNCTIONS:
            self.expect("(")
            arg = self.parse_expr()
            self.expect(")")
            return prim(name, arg)
        if name == "abs2":
            self.expect("(")
            k = self._int_literal()
            self.expect(",")
            l = self._int_literal()
            self.expect(")")
            if not (1 <= k <= l):
                raise SyntaxErrorAt(f"abs2 range {k}..{l} is empty or invalid", off)
            self._check_index(l, off)
            return add(*(pow_(var(j), 2) for j in range(k, l + 1)))
        if name.startswith("x") and name[1:].isdigit():
            idx = int(name[1:])
            self._check_index(idx, off)
            return var(idx)
        raise SyntaxErrorAt(f"unknown identifier {name!r}", off)

    def _int_literal(self):
        t = self.next()
        if t[0] != "num":
            raise SyntaxErrorAt("expected an integer literal", t[2])
        return t[1]

    def _check_index(self, idx, off):
        if idx < 1:
            raise SyntaxErrorAt("variable indices start at 1", off)
        if self.dim is not None and idx > self.dim:
            raise SyntaxErrorAt(
                f"variable x{idx} exceeds chart dimension {self.dim}", off)


def parse(source, dim=None):
    """Parse DSL text into a canonical Expr; dim bounds variable indices."""
    p = _Parser(_tokenize(source), dim)
    e = p.parse_expr()
    kind, valx, off = p.peek()
    if kind != "end":
        raise SyntaxErrorAt(f"trailing input {valx!r}", off)
    return e


# ---------------------------------------------------------------------------
# Formatter
# ---------------------------------------------------------------------------

def _fmt_fraction(fr):
    if fr.denominator == 1:
        return str(fr.numerator)
    return f"{fr.numerator}/{fr.denominator}"


def _fmt_const(c, prec):
    re, im = c.re, c.im
    if im == 0:
        s = _fmt_fraction(re)
        need = prec >= 20 and (re < 0 or re.denominator != 1)
        return f"({s})" if need else s
    if re == 0:
        if im == 1:
            return "i"
        if im == -1:
            return "-i" if prec < 20 else "(-i)"
        s = f"{_fmt_fraction(im)}*i"
        return f"({s})" if prec >= 20 else s
    ims = "i" if im == 1 else ("-i" if im == -1 else f"{_fmt_fraction(im)}*i")
    if im > 0 and not ims.startswith("-"):
        s = f"{_fmt_fraction(re)}+{ims}"
    else:
        s = f"{_fmt_fraction(re)}{ims}" if ims.startswith("-") else f"{_fmt_fraction(re)}+{ims}"
    return f"({s})"


def _is_negative_lead(e):
    c, _ = coeff_split(e)
    return c.re < 0 or (c.re == 0 and c.im < 0)


def _fmt(e, prec):
    if isinstance(e, Const):
        return _fmt_const(e.value, prec)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Prim):
        return f"{e.name}({_fmt(e.arg, 0)})"
    if isinstance(e, Power):
        q = e.exponent
        if q == Fraction(1, 2):
            return f"sqrt({_fmt(e.base, 0)})"
        b = _fmt(e.base, 30)
        if q.denominator == 1 and q > 0:
            return f"{b}^{q.numerator}"
        return f"{b}^({_fmt_fraction(q)})"
    if isinstance(e, Product):
        num, den = [], []
        sign = ""
        coeff = None
        for f in e.factors:
            if isinstance(f, Const):
                if f.value == CRat(-1):
                    sign = "-"
                else:
                    coeff = f
            elif isinstance(f, Power) and f.exponent < 0:
                den.append(pow_(f.base, -f.exponent))
            else:
                num.append(f)
        parts = [_fmt(f, 20) for f in num]
        if coeff is not None:
            parts.insert(0, _fmt_const(coeff.value, 20))
        s = "*".join(parts) if parts else "1"
        if den:
            d = "*".join(_fmt(f, 20) for f in den)
            if len(den) > 1 or isinstance(den[0], (Sum, Product)):
                d = f"({d})"
            s = f"{s}/{d}"
        s = sign + s
        return f"({s})" if prec >= 30 else s
    if isinstance(e, Sum):
        parts = []
        for idx, t in enumerate(e.terms):
            if idx > 0 and _is_negative_lead(t):
                tpos = mul(const(-1), t)
                parts.append(f" - {_fmt(tpos, 11)}")
            elif idx > 0:
                parts.append(f" + {_fmt(t, 11)}")
            else:
                parts.append(_fmt(t, 11))
        s = "".join(parts)
        return f"({s})" if prec >= 20 else s
    raise PqmorphError(f"cannot format {e!r}")


def format_expr(e):
    """Deterministic DSL text; parse(format_expr(e)) is e."""
    return _fmt(e, 0)
