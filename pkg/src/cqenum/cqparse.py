"""Conjunctive queries: parsing, pretty-printing and the derived queries.

Grammar (whitespace-insensitive)::

    query  := [ "exists" ident+ "." ] atom ( "," atom )*
    atom   := ident "(" [ ident ( "," ident )* ] ")"

Variables are numbered by first occurrence in the atom list. Sets of
variables are handled internally as bitmasks over those numbers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import (ArityMismatch, DuplicateQuantifier, NotSubsetClosed, QuantifiedVarUnused,
                     QuerySyntaxError, ScopeError)

_TOKEN = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_']*)|(?P<punct>[(),.]))")


@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple[str, ...]

    def __str__(self):
        return f"{self.relation}({','.join(self.args)})"

    @property
    def vars(self) -> frozenset:
        return frozenset(self.args)


@dataclass(frozen=True)
class CQ:
    atoms: tuple[Atom, ...]
    quantified: tuple[str, ...] = ()
    # filled in by __post_init__
    variables: tuple[str, ...] = field(default=(), compare=False)
    free: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.atoms:
            raise QuerySyntaxError("a query needs at least one atom")
        order: dict[str, int] = {}
        for a in self.atoms:
            for v in a.args:
                order.setdefault(v, len(order))
        if len(set(self.quantified)) != len(self.quantified):
            raise DuplicateQuantifier(f"repeated quantified variable in {self.quantified}")
        for v in self.quantified:
            if v not in order:
                raise QuantifiedVarUnused(f"quantified variable {v!r} does not occur in any atom")
        q = set(self.quantified)
        object.__setattr__(self, "variables", tuple(order))
        object.__setattr__(self, "free", tuple(v for v in order if v not in q))
        object.__setattr__(self, "_index", order)

    # -- variable bookkeeping ------------------------------------------------

    @property
    def k(self) -> int:
        return len(self.variables)

    def index(self, v: str) -> int:
        try:
            return self._index[v]
        except KeyError:
            raise ScopeError(f"{v!r} is not a variable of the query") from None

    def mask(self, vs: Iterable[str]) -> int:
        m = 0
        for v in vs:
            m |= 1 << self.index(v)
        return m

    def names(self, mask: int) -> tuple[str, ...]:
        return tuple(v for i, v in enumerate(self.variables) if mask >> i & 1)

    @property
    def all_mask(self) -> int:
        return (1 << self.k) - 1

    @property
    def free_mask(self) -> int:
        return self.mask(self.free)

    def atom_mask(self, atom: Atom) -> int:
        return self.mask(atom.args)

    def relation_names(self) -> tuple[str, ...]:
        seen = dict.fromkeys(a.relation for a in self.atoms)
        return tuple(seen)

    def strip_quantifiers(self) -> "CQ":
        return CQ(self.atoms)

    def __str__(self):
        body = ", ".join(map(str, self.atoms))
        if self.quantified:
            return f"exists {' '.join(self.quantified)} . {body}"
        return body


def _tokens(text: str):
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if not mt or mt.end() == pos:
            raise QuerySyntaxError(f"unexpected character {text[pos:].lstrip()[:1]!r} at offset {pos}")
        pos = mt.end()
        yield mt.group("ident") or mt.group("punct")


def parse_cq(text: str) -> CQ:
    toks = list(_tokens(text))
    i = 0

    def peek():
        return toks[i] if i < len(toks) else None

    def take(expected=None):
        nonlocal i
        if i >= len(toks):
            raise QuerySyntaxError(f"unexpected end of query, expected {expected or 'token'}")
        t = toks[i]
        if expected is not None and t != expected:
            raise QuerySyntaxError(f"expected {expected!r}, got {t!r}")
        i += 1
        return t

    def ident():
        t = take()
        if t in ("(", ")", ",", "."):
            raise QuerySyntaxError(f"expected an identifier, got {t!r}")
        return t

    quantified = []
    if peek() == "exists":
        take()
        while peek() not in (".", None):
            quantified.append(ident())
        take(".")
        if not quantified:
            raise QuerySyntaxError("'exists' without variables")
    atoms = []
    while True:
        rel = ident()
        take("(")
        args = []
        if peek() != ")":
            args.append(ident())
            while peek() == ",":
                take()
                args.append(ident())
        take(")")
        atoms.append(Atom(rel, tuple(args)))
        if peek() is None:
            break
        take(",")
    return CQ(tuple(atoms), tuple(quantified))


def format_cq(q: CQ) -> str:
    return str(q)


# -- projected queries -----------------------------------------------------------


@dataclass(frozen=True)
class ProjectedQuery:
    """Every atom of ``base`` restricted to the variables in ``scope``."""

    base: CQ
    scope: tuple[str, ...]
    projected: tuple[tuple[Atom, tuple[str, ...]], ...]

    @property
    def free(self):
        return self.scope

    def evaluate(self, structure) -> set[tuple]:
        """Answer set as id tuples over ``scope`` (ordered by variable index)."""
        from .relmodel import build_selection_index

        scope = self.scope
        # per atom: distinct projections of matching tuples onto its scoped vars
        constraints = []
        for atom, kept in self.projected:
            if structure.arity(atom.relation) != len(atom.args):
                raise ArityMismatch(f"{atom} used with arity {structure.arity(atom.relation)}")
            first = {}
            for p, v in enumerate(atom.args):
                first.setdefault(v, p)
            eq = [(p, first[v]) for p, v in enumerate(atom.args) if first[v] != p]
            pos = [first[v] for v in kept]
            idx = build_selection_index(structure, atom.relation, pos)
            rel = set()
            for key, bucket in idx.items():
                if any(all(t[p] == t[q] for p, q in eq) for t in bucket):
                    rel.add(key)
            if not kept:
                if not rel:
                    return set()
                continue
            constraints.append((kept, rel))
        # backtracking join over scope variables in order
        order = list(scope)
        checks_at = {v: [] for v in order}
        for kept, rel in constraints:
            last = max(kept, key=order.index)
            checks_at[last].append((kept, rel))
        # candidate values: intersect the columns of every constraint mentioning the variable
        cand = {}
        for v in order:
            vals = None
            for kept, rel in constraints:
                if v in kept:
                    j = kept.index(v)
                    col = {t[j] for t in rel}
                    vals = col if vals is None else vals & col
            cand[v] = sorted(vals)
        out = set()
        assign: dict[str, int] = {}

        def rec(d):
            if d == len(order):
                out.add(tuple(assign[v] for v in scope))
                return
            v = order[d]
            for c in cand[v]:
                assign[v] = c
                if all(tuple(assign[u] for u in kept) in rel for kept, rel in checks_at[v]):
                    rec(d + 1)
            assign.pop(v, None)

        rec(0)
        return out


def project_query(q: CQ, scope: Iterable[str]) -> ProjectedQuery:
    scope_set = set(scope)
    bad = scope_set - set(q.variables)
    if bad:
        raise ScopeError(f"variables {sorted(bad)} are not in the query")
    ordered = tuple(v for v in q.variables if v in scope_set)
    projected = []
    for atom in q.atoms:
        kept = tuple(dict.fromkeys(v for v in atom.args if v in scope_set))
        kept = tuple(sorted(kept, key=q.index))
        projected.append((atom, kept))
    return ProjectedQuery(q, ordered, tuple(projected))


# -- refined queries -------------------------------------------------------------


def table_name(q: CQ, mask: int) -> str:
    """Relation symbol used for the expansion table of a variable set."""
    return "R_{" + ",".join(q.names(mask)) + "}"


def _check_family(q: CQ, family: Iterable[int]) -> frozenset:
    fam = frozenset(int(m) for m in family)
    for m in fam:
        if m < 0 or m & ~q.all_mask:
            raise ScopeError(f"set {m:#b} uses variables outside the query")
    for m in fam:
        for i in range(q.k):
            if m >> i & 1 and (m & ~(1 << i)) not in fam:
                raise NotSubsetClosed(f"{q.names(m)} is in the family but "
                                      f"{q.names(m & ~(1 << i))} is not")
    return fam


@dataclass(frozen=True)
class RefinedQuery:
    """The base query conjoined with one table atom per set of the family."""

    base: CQ
    family: frozenset

    def table_atoms(self) -> tuple[Atom, ...]:
        return tuple(Atom(table_name(self.base, m), self.base.names(m))
                     for m in sorted(self.family, key=lambda m: (bin(m).count("1"), m)))

    @property
    def signature(self) -> tuple[str, ...]:
        """Relation symbols of the refined query: base symbols, then table symbols."""
        return self.base.relation_names() + tuple(a.relation for a in self.table_atoms())

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return self.base.atoms + self.table_atoms()


def refine_query(q: CQ, family: Iterable) -> RefinedQuery:
    """``family`` holds bitmasks or iterables of variable names."""
    if q.quantified:
        raise ScopeError("refinements are defined for quantifier-free queries")
    masks = []
    for s in family:
        if isinstance(s, int):
            masks.append(s)
        else:
            masks.append(q.mask(s))
    return RefinedQuery(q, _check_family(q, masks))
