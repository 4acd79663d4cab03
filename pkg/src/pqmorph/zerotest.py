"""Domains with guards, seeded sampling, and the layered zero-testing policy.

Zero testing is a policy, not a decision procedure: first normalize
symbolically (a literal 0 is a certificate), then evaluate at seeded sample
points and compare scaled residuals against the tolerance.  A ``NonZero``
verdict carries a witness point whose scaled residual exceeds ten times the
tolerance; ``NumericallyZero`` means every sampled residual stayed at or
below it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExpressionBudgetExceeded, SamplingFailed
from .expr import ZERO, evaluate, free_vars
from .simplify import simplify

__all__ = ["Guard", "Domain", "ZeroStatus", "NumericPolicy", "is_zero",
           "sample_points", "DEFAULT_POLICY"]

_RELATIONS = ("pos", "nonzero", "offcut")


@dataclass(frozen=True)
class Guard:
    """An open condition on the chart: expr > 0, expr != 0, or expr off the
    nonpositive real axis ("offcut", for branch safety of sqrt/log)."""
    expr: object
    relation: str = "pos"

    def __post_init__(self):
        if self.relation not in _RELATIONS:
            raise ValueError(f"unknown guard relation {self.relation!r}")

    def satisfied(self, point, margin):
        v, _ = evaluate(self.expr, point)
        if self.relation == "pos":
            return abs(v.imag) <= 1e-9 * (1 + abs(v)) and v.real >= margin
        if self.relation == "nonzero":
            return abs(v) >= margin
        return v.real > margin or abs(v.imag) > margin


class Domain:
    """An open subset of R^m: a sampling box plus guard conditions."""

    def __init__(self, dimension, guards=(), box=None, margin=0.1):
        self.dimension = dimension
        self.guards = tuple(guards)
        if box is None:
            box = ((0.3, 1.3),) * dimension
        elif isinstance(box[0], (int, float)):
            box = (tuple(box),) * dimension
        else:
            box = tuple(tuple(b) for b in box)
            if len(box) != dimension:
                raise ValueError("box must give one interval per variable")
        self.box = box
        self.margin = margin
        for g in self.guards:
            if g.expr.max_var > dimension:
                raise ValueError("guard uses variables beyond the chart dimension")
        self._facts = None

    def positive_facts(self):
        """Canonical expressions guaranteed positive, for guard-aware rewrites."""
        if self._facts is None:
            facts = set()
            for g in self.guards:
                if g.relation == "pos":
                    facts.add(simplify(g.expr))
            self._facts = frozenset(facts)
        return self._facts

    def __repr__(self):
        return f"Domain(dim={self.dimension}, guards={len(self.guards)})"


def sample_points(domain, n, rng, attempts_factor=200):
    """Seeded rejection sampling of points satisfying all guards with margin."""
    pts = []
    lo = np.array([b[0] for b in domain.box])
    hi = np.array([b[1] for b in domain.box])
    attempts = 0
    budget = attempts_factor * max(n, 1)
    while len(pts) < n:
        if attempts >= budget:
            raise SamplingFailed(
                f"found {len(pts)}/{n} points after {attempts} attempts")
        attempts += 1
        x = tuple(lo + rng.random(domain.dimension) * (hi - lo))
        if all(g.satisfied(x, domain.margin) for g in domain.guards):
            pts.append(x)
    return pts


@dataclass(frozen=True)
class ZeroStatus:
    """Outcome of a zero test.

    kind is one of "symbolic_zero", "numerically_zero", "nonzero".
    """
    kind: str
    samples: int = 0
    max_residual: float = 0.0
    witness: tuple = None
    value: complex = None

    @property
    def is_zero(self):
        return self.kind != "nonzero"

    @property
    def symbolic(self):
        return self.kind == "symbolic_zero"

    def describe(self):
        if self.kind == "symbolic_zero":
            return "0 (symbolic)"
        if self.kind == "numerically_zero":
            return f"0 (numeric, {self.samples} samples, max residual {self.max_residual:.2e})"
        return f"nonzero (residual {self.max_residual:.2e} at {self.witness})"


def symbolic_zero():
    return ZeroStatus("symbolic_zero")


@dataclass(frozen=True)
class NumericPolicy:
    """Sampling and tolerance configuration for numeric zero claims.

    The tolerance relaxes to ``tol_order8`` for total derivative order 8
    (p = 4 conditions), where double-precision jets lose a couple of digits.
    """
    samples: int = 20
    tol: float = 1e-8
    tol_order8: float = 1e-6
    nonzero_factor: float = 10.0
    seed: int = 0

    def tolerance_for(self, order):
        return self.tol_order8 if order >= 8 else self.tol


DEFAULT_POLICY = NumericPolicy()


def residuals_to_status(pairs, tol, policy=DEFAULT_POLICY):
    """Classify (point, value, scale) triples into a ZeroStatus."""
    worst = None
    for point, value, scale in pairs:
        res = abs(value) / max(scale, 1e-300)
        if worst is None or res > worst[0]:
            worst = (res, point, value)
    if worst is None:
        raise SamplingFailed("no sample points supplied")
    res, point, value = worst
    if res <= tol:
        return ZeroStatus("numerically_zero", samples=len(pairs), max_residual=res)
    # Residuals in (tol, 10*tol] are ambiguous; in practice true zeros sit
    # orders of magnitude below tol, so classify conservatively as nonzero.
    return ZeroStatus("nonzero", samples=len(pairs), max_residual=res,
                      witness=point, value=value)


def is_zero(e, domain, policy=None, tol=None, points=None):
    """Layered zero test: normalize, then sample scaled residuals."""
    policy = policy or DEFAULT_POLICY
    if tol is None:
        tol = policy.tol
    try:
        es = simplify(e, domain)
    except ExpressionBudgetExceeded:
        es = e
    if es is ZERO:
        return symbolic_zero()
    if points is None:
        rng = np.random.default_rng(policy.seed)
        points = sample_points(domain, policy.samples, rng)
    pairs = []
    for pt in points:
        v, scale = evaluate(es, pt)
        pairs.append((pt, v, scale))
    return residuals_to_status(pairs, tol, policy)
