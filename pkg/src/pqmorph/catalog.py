"""Machine-readable registry of the worked examples and table rows.

Entries live as DSL text files in ``catalog_data/`` (override the directory
with the ``PQMORPH_DATA`` environment variable).  A file holds ``key=value``
metadata lines followed by one expression line; ``guard=`` lines use the
relation suffixes ``>0``, ``!=0`` and ``offcut``.  Dual entries may give
``dual_of=<id>`` instead of (or in addition to) an expression, in which case
the expression is constructed by composing the base entry with the chart
inversion; when both are present the two forms are cross-checked.

Expected classifications carry a certainty flag: ``paper-unknown`` marks the
rows whose source left the classification open ('?'), and those entries are
reported without pass/fail semantics.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources

from .calculus import ComplexFunction
from .construct import dualize
from .errors import PqmorphError, UnknownId
from .expr import ZERO, sub
from .morphism import check_morphism
from .parse import parse
from .simplify import simplify
from .zerotest import DEFAULT_POLICY, Domain, Guard, is_zero

__all__ = ["CatalogEntry", "catalog_list", "catalog_get", "catalog_check",
           "catalog_dir"]


@dataclass
class CatalogEntry:
    id: str
    function: ComplexFunction
    p: int
    q: int
    proper: bool
    holds: bool
    certainty: str          # "paper-stated" | "paper-unknown"
    cite: str
    mode: str               # preferred checking mode
    dual_of: str = None
    dual_check: str = "symbolic"   # "symbolic" | "numeric" | "skip"

    @property
    def paper_stated(self):
        return self.certainty == "paper-stated"


def catalog_dir():
    override = os.environ.get("PQMORPH_DATA")
    if override:
        return override
    return str(resources.files("pqmorph") / "catalog_data")


def _parse_guard(text, dim):
    for suffix, rel in ((">0", "pos"), ("!=0", "nonzero"), ("offcut", "offcut")):
        if text.endswith(suffix):
            expr = parse(text[: -len(suffix)].strip(), dim)
            return Guard(expr, rel)
    raise PqmorphError(f"guard {text!r} lacks a relation suffix (>0, !=0, offcut)")


def _parse_box(text, dim):
    parts = [p.strip() for p in text.split(",")]
    def interval(s):
        lo, hi = s.split(":")
        return (float(lo), float(hi))
    if len(parts) == 1:
        return (interval(parts[0]),) * dim
    if len(parts) != dim:
        raise PqmorphError("box must give one interval or one per variable")
    return tuple(interval(p) for p in parts)


def _load_entry(entry_id, path, cache):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh]
    meta = {}
    guards = []
    expr_text = None
    for ln in lines:
        if not ln or ln.startswith("#"):
            continue
        if "=" in ln and ln.split("=", 1)[0] in (
                "id", "dim", "guard", "p", "q", "proper", "holds", "certainty",
                "cite", "mode", "box", "dual_of", "dual_check", "margin"):
            key, val = ln.split("=", 1)
            if key == "guard":
                guards.append(val)
            else:
                meta[key] = val
        else:
            expr_text = ln
    dim = int(meta["dim"])
    gs = [_parse_guard(g, dim) for g in guards]
    box = _parse_box(meta["box"], dim) if "box" in meta else None
    margin = float(meta.get("margin", 0.1))
    dom = Domain(dim, gs, box=box, margin=margin)

    dual_of = meta.get("dual_of")
    if expr_text is not None:
        fn = ComplexFunction(parse(expr_text, dim), dom)
    elif dual_of:
        base = cache[dual_of]
        dual = dualize(base.function)
        fn = ComplexFunction(dual.expr, dom)
    else:
        raise PqmorphError(f"entry {entry_id} has neither expression nor dual_of")

    return CatalogEntry(
        id=entry_id,
        function=fn,
        p=int(meta["p"]),
        q=int(meta["q"]),
        proper=meta.get("proper", "true") == "true",
        holds=meta.get("holds", "true") == "true",
        certainty=meta.get("certainty", "paper-stated"),
        cite=meta.get("cite", ""),
        mode=meta.get("mode", "symbolic"),
        dual_of=dual_of,
        dual_check=meta.get("dual_check", "symbolic"),
    )


_CACHE = None


def _load_all():
    global _CACHE
    if _CACHE is not None:
        return _CACHE
    d = catalog_dir()
    files = sorted(f for f in os.listdir(d) if f.endswith(".txt"))
    ids = [f[:-4] for f in files]
    cache = {}
    # two passes so dual_of references resolve regardless of name order
    pending = dict(zip(ids, files))
    for _ in range(3):
        progressed = False
        for eid in list(pending):
            path = os.path.join(d, pending[eid])
            try:
                cache[eid] = _load_entry(eid, path, cache)
            except KeyError:
                continue
            del pending[eid]
            progressed = True
        if not pending:
            break
        if not progressed:
            raise PqmorphError(f"unresolvable dual_of references: {sorted(pending)}")
    _CACHE = cache
    return cache


def catalog_list():
    """Deterministically ordered entry ids."""
    return sorted(_load_all())


def catalog_get(entry_id):
    entries = _load_all()
    if entry_id not in entries:
        raise UnknownId(f"no catalog entry {entry_id!r}")
    return entries[entry_id]


@dataclass
class CatalogResult:
    entry: CatalogEntry
    report: object
    match: bool          # None for paper-unknown entries
    dual_consistent: bool = None

    def describe(self):
        r = self.report
        got = f"{r.verdict} (p,q)=({r.p},{r.q}) proper={r.is_proper}"
        if self.match is None:
            return f"{self.entry.id}: [informational] {got}"
        tag = "ok" if self.match else "MISMATCH"
        return f"{self.entry.id}: {tag} {got}"


def catalog_check(entry_id, mode=None, policy=None, check_dual=True):
    """Check an entry at its expected (p, q) and compare with the record."""
    entry = catalog_get(entry_id)
    policy = policy or DEFAULT_POLICY
    run_mode = mode or entry.mode
    report = check_morphism(entry.function, entry.p, entry.q,
                            mode=run_mode, policy=policy, candidate=entry.id)
    if entry.certainty == "paper-unknown":
        match = None
    else:
        match = report.holds == entry.holds
        if entry.holds and match:
            match = report.is_proper == entry.proper
    dual_ok = None
    if check_dual and entry.dual_of and entry.dual_check != "skip":
        base = catalog_get(entry.dual_of)
        built = dualize(base.function)
        diff = sub(entry.function.expr, built.expr)
        if entry.dual_check == "symbolic":
            dual_ok = simplify(diff, entry.function.domain) is ZERO
        else:
            dual_ok = is_zero(diff, entry.function.domain, policy).is_zero
    return CatalogResult(entry, report, match, dual_ok)
