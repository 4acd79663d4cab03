"""Condition systems, candidate checking, classification and coefficients.

A complex-valued z is a (p,q)-harmonic morphism exactly when kappa(z,z) = 0
and tau^p(z^j zbar^k) = 0 for the finite exponent family

    { (j, k) : 0 <= k <= q-1,  max(1, k) <= j <= p }        (p >= q)

ordered row-major by k then j.  For p < q the requirement degenerates to a
constancy check (the gradient must vanish identically).  Checking is
symbolic-first with an automatic, recorded fallback to the jet oracle when
the symbolic route exceeds its budget; properness is the nonvanishing of
tau^(p-1)(z).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .calculus import (ComplexFunction, conj_function, gradient,
                       iterate_tension, kappa)
from .errors import ExpressionBudgetExceeded, PqmorphError
from .expr import ZERO, conjugate, mul, pow_
from .jet import eval_jet, laplacian_power_scaled
from .simplify import simplify
from .zerotest import (DEFAULT_POLICY, ZeroStatus, is_zero, residuals_to_status,
                       sample_points, symbolic_zero)

__all__ = ["ConditionSystem", "MorphismReport", "condition_system",
           "check_morphism", "check_properness", "classify", "coefficients"]


@dataclass(frozen=True)
class ConditionSystem:
    """The monomial exponents whose iterated tension must vanish."""
    p: int
    q: int
    monomials: tuple
    includes_conformality: bool = True
    constancy_mode: bool = False

    def describe(self):
        if self.constancy_mode:
            return f"(p,q)=({self.p},{self.q}): constancy (p < q)"
        conds = ", ".join(f"tau^{self.p}(z^{j}" + (f" zb^{k}" if k else "") + ")"
                          for j, k in self.monomials)
        return f"kappa(z,z) = 0; {conds} = 0"


def condition_system(p, q):
    """Exponent family for the (p,q) characterization."""
    if p < 1 or q < 1:
        raise PqmorphError("p and q must be positive")
    if p < q:
        return ConditionSystem(p, q, (), constancy_mode=True)
    monos = []
    for k in range(q):
        for j in range(max(1, k), p + 1):
            monos.append((j, k))
    return ConditionSystem(p, q, tuple(monos))


@dataclass
class MorphismReport:
    candidate: str
    p: int
    q: int
    conditions: dict            # key -> ZeroStatus; keys are (j, k) or "grad_k"
    kappa_status: ZeroStatus
    proper: ZeroStatus          # status of tau^(p-1)(z); nonzero => proper
    verdict: str                # "holds" | "holds_numerically_only" | "fails"
    failed_condition: object = None
    mode: str = "symbolic"
    fallbacks: tuple = ()

    @property
    def holds(self):
        return self.verdict in ("holds", "holds_numerically_only")

    @property
    def is_proper(self):
        return not self.proper.is_zero

    def to_json_dict(self):
        conds = []
        for key, st in self.conditions.items():
            if isinstance(key, tuple):
                j, k = key
                entry = {"j": j, "k": k}
            else:
                entry = {"j": 0, "k": 0, "label": key}
            entry["status"] = st.kind
            entry["residual"] = st.max_residual
            if st.witness is not None:
                entry["witness"] = list(st.witness)
            conds.append(entry)
        return {
            "candidate": self.candidate,
            "p": self.p,
            "q": self.q,
            "conditions": conds,
            "kappa_status": self.kappa_status.kind,
            "proper": not self.proper.is_zero,
            "verdict": self.verdict,
            "mode": self.mode,
            "fallbacks": [list(f) if isinstance(f, tuple) else f
                          for f in self.fallbacks],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_json_dict(), **kw)


def _numeric_statuses(z, monos, p, policy, points, tol):
    """Evaluate all tau^p(z^j zbar^k) conditions via shared jets per point."""
    per_condition = {mono: [] for mono in monos}
    kappa_vals = []
    D = 2 * p
    for pt in points:
        memo = {}
        jz = eval_jet(z.expr, pt, D, memo)
        jzb = jz.conj()
        powers = {0: None}
        for (j, k) in monos:
            w = jz.pow_int(j)
            if k:
                w = w * jzb.pow_int(k)
            per_condition[(j, k)].append((pt,) + laplacian_power_scaled(w, p))
        # kappa(z,z) from first-order coefficients
        kz = None
        for axis in range(jz.space.m):
            t = jz.partial(axis) * jz.partial(axis)
            kz = t if kz is None else kz + t
        kappa_vals.append((pt, kz.value, max(kz.scale, kz.norm())))
    out = {}
    for mono, triples in per_condition.items():
        out[mono] = residuals_to_status(triples, tol)
    kstat = residuals_to_status(kappa_vals, tol)
    return out, kstat


def _numeric_properness(z, p, policy, points, tol):
    if p == 1:
        vals = []
        for pt in points:
            j = eval_jet(z.expr, pt, 0)
            vals.append((pt, j.value, max(j.scale, abs(j.value))))
        return residuals_to_status(vals, tol)
    vals = []
    for pt in points:
        j = eval_jet(z.expr, pt, 2 * (p - 1))
        vals.append((pt,) + laplacian_power_scaled(j, p - 1))
    return residuals_to_status(vals, tol)


def check_morphism(z, p, q, mode="symbolic", policy=None, candidate=""):
    """Run the (p,q) condition system on z and assemble a report.

    mode "symbolic": certify each condition symbolically where the budget
    allows, with automatic per-condition fallback to the jet oracle (each
    fallback is recorded).  mode "numeric": jets only.
    """
    policy = policy or DEFAULT_POLICY
    cs = condition_system(p, q)
    tol = policy.tolerance_for(2 * p)
    rng = np.random.default_rng(policy.seed)
    points = sample_points(z.domain, policy.samples, rng)
    fallbacks = []

    if cs.constancy_mode:
        conditions = {}
        grads = gradient(z)
        for k, g in enumerate(grads, start=1):
            conditions[f"grad_{k}"] = is_zero(g, z.domain, policy,
                                              tol=tol, points=points)
        kstat = is_zero(kappa(z, z), z.domain, policy, tol=tol, points=points)
        proper = _numeric_properness(z, max(p, 1), policy, points, tol)
        verdict, failed = _assemble_verdict(conditions, kstat)
        return MorphismReport(candidate, p, q, conditions, kstat, proper,
                              verdict, failed, mode="constancy")

    conditions = {}
    kstat = None
    if mode == "numeric":
        if not z.metric.euclidean:
            raise PqmorphError("the jet oracle only covers Euclidean charts")
        conditions, kstat = _numeric_statuses(z, cs.monomials, p, policy,
                                              points, tol)
        proper = _numeric_properness(z, p, policy, points, tol)
        run_mode = "numeric"
    else:
        run_mode = "symbolic"
        zb = conjugate(z.expr)
        try:
            kstat = is_zero(kappa(z, z), z.domain, policy, tol=tol, points=points)
        except ExpressionBudgetExceeded:
            _, kstat = _numeric_statuses(z, (), p, policy, points, tol)
            fallbacks.append("kappa")
        for (j, k) in cs.monomials:
            try:
                expr = mul(pow_(z.expr, j), pow_(zb, k))
                tp = iterate_tension(z.with_expr(expr), p)
                conditions[(j, k)] = is_zero(tp, z.domain, policy,
                                             tol=tol, points=points)
            except ExpressionBudgetExceeded:
                got, _ = _numeric_statuses(z, ((j, k),), p, policy, points, tol)
                conditions[(j, k)] = got[(j, k)]
                fallbacks.append((j, k))
        try:
            if p == 1:
                proper = is_zero(z.expr, z.domain, policy, tol=tol, points=points)
            else:
                tp1 = iterate_tension(z, p - 1)
                proper = is_zero(tp1, z.domain, policy, tol=tol, points=points)
        except ExpressionBudgetExceeded:
            proper = _numeric_properness(z, p, policy, points, tol)
            fallbacks.append("properness")

    verdict, failed = _assemble_verdict(conditions, kstat)
    return MorphismReport(candidate, p, q, conditions, kstat, proper, verdict,
                          failed, mode=run_mode, fallbacks=tuple(fallbacks))


def _assemble_verdict(conditions, kstat):
    all_statuses = [("kappa", kstat)] + sorted(
        ((k, v) for k, v in conditions.items()),
        key=lambda kv: (str(kv[0]) if not isinstance(kv[0], tuple) else "",
                        kv[0] if isinstance(kv[0], tuple) else (0, 0)))
    for key, st in all_statuses:
        if not st.is_zero:
            return "fails", key
    if all(st.symbolic for _, st in all_statuses):
        return "holds", None
    return "holds_numerically_only", None


def check_properness(z, p, policy=None):
    """Status of tau^(p-1)(z); a nonzero witness means z is proper at p."""
    policy = policy or DEFAULT_POLICY
    tol = policy.tolerance_for(2 * (p - 1)) if p > 1 else policy.tol
    rng = np.random.default_rng(policy.seed)
    points = sample_points(z.domain, policy.samples, rng)
    if p == 1:
        return is_zero(z.expr, z.domain, policy, tol=tol, points=points)
    try:
        return is_zero(iterate_tension(z, p - 1), z.domain, policy,
                       tol=tol, points=points)
    except ExpressionBudgetExceeded:
        return _numeric_properness(z, p, policy, points, tol)


def classify(z, max_p=4, max_q=4, mode="symbolic", policy=None):
    """Verdict grid over (p, q) with monotonicity pruning.

    Holding at (p,q) implies holding at (p+1,q) and (p,q-1), so those cells
    are filled by inference.  Returns (table, minimal_p, proper_at_minimal)
    where minimal_p is the least p with (p,1) holding within the budget.
    """
    table = {}
    minimal_p = None
    proper_min = None
    for p in range(1, max_p + 1):
        for q in range(1, min(p, max_q) + 1):
            if (p, q) in table:
                continue
            rep = check_morphism(z, p, q, mode=mode, policy=policy)
            table[(p, q)] = "holds" if rep.holds else "fails"
            if rep.holds:
                for p2 in range(p, max_p + 1):
                    for q2 in range(1, q + 1):
                        table.setdefault((p2, q2), "holds")
        if minimal_p is None and table.get((p, 1)) == "holds":
            minimal_p = p
            proper_min = not check_properness(z, p, policy).is_zero
    return table, minimal_p, proper_min


def _binom(n, k):
    from math import comb
    return comb(n, k)


def coefficients(z, p, policy=None, include_anchors=True):
    """Coefficient functions c_jk of the p-th iterate expansion.

    c_jk = sum_{r <= j, s <= k} (-1)^(j-r+k-s) / (j! k!) C(j,r) C(k,s)
           * z^(j-r) zbar^(k-s) tau^p(z^r zbar^s)

    Returns (table, checks): the table maps (j,k) with 0 <= j,k <= p and
    1 <= j+k <= 2p (plus the (2p,0)/(0,2p) anchors) to expressions, and the
    checks record conjugation symmetry c_jk = conj(c_kj), the anchor
    identities c_10 = tau^p(z), c_{2p,0} = kappa(z,z)^p, and for p = 2 the
    agreement of c_20 with the kappa/tau bridge combination.
    """
    from math import factorial
    policy = policy or DEFAULT_POLICY
    zb_expr = conjugate(z.expr)
    taus = {}

    def tau_mono(r, s):
        got = taus.get((r, s))
        if got is None:
            if r == 0 and s == 0:
                got = ZERO
            else:
                e = mul(pow_(z.expr, r), pow_(zb_expr, s))
                got = iterate_tension(z.with_expr(e), p)
            taus[(r, s)] = got
        return got

    def c_jk(j, k):
        from fractions import Fraction
        from .expr import add, const, CRat
        terms = []
        for r in range(j + 1):
            for s in range(k + 1):
                t = tau_mono(r, s)
                if t is ZERO:
                    continue
                sign = -1 if (j - r + k - s) % 2 else 1
                coeff = Fraction(sign * _binom(j, r) * _binom(k, s),
                                 factorial(j) * factorial(k))
                terms.append(mul(const(CRat(coeff)),
                                 pow_(z.expr, j - r), pow_(zb_expr, k - s), t))
        return simplify(add(*terms), z.domain) if terms else ZERO

    pairs = [(j, k) for j in range(p + 1) for k in range(p + 1)
             if 1 <= j + k]
    if include_anchors:
        pairs += [(2 * p, 0), (0, 2 * p)]
    table = {}
    for j, k in sorted(set(pairs)):
        table[(j, k)] = c_jk(j, k)

    checks = {}
    # conjugation symmetry on the square part
    for j in range(p + 1):
        for k in range(j, p + 1):
            if (j, k) in table and (k, j) in table:
                diff = simplify(table[(j, k)] - conjugate(table[(k, j)]),
                                z.domain)
                checks[f"conj-symmetry-{j}{k}"] = (
                    symbolic_zero() if diff is ZERO
                    else is_zero(diff, z.domain, policy))
    checks["anchor-c10"] = (
        symbolic_zero()
        if simplify(table[(1, 0)] - tau_mono(1, 0), z.domain) is ZERO
        else is_zero(table[(1, 0)] - tau_mono(1, 0), z.domain, policy))
    kzz = kappa(z, z)
    anchor = simplify(table[(2 * p, 0)] - pow_(kzz, p), z.domain)
    checks["anchor-c2p0"] = (symbolic_zero() if anchor is ZERO
                             else is_zero(anchor, z.domain, policy))
    if p == 2:
        zfn = z
        t = iterate_tension(zfn, 1)
        bridge = (mul(t, t) + mul(const(2), kappa(zfn, zfn.with_expr(t)))
                  + iterate_tension(zfn.with_expr(kzz), 1))
        diff = simplify(table[(2, 0)] - bridge, z.domain)
        checks["bridge-c20"] = (symbolic_zero() if diff is ZERO
                                else is_zero(diff, z.domain, policy))
    return table, checks
