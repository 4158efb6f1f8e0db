"""Naive reference evaluation by backtracking over domain values.

Deliberately independent of the numpy engine: relations are Python sets
of tuples and every check is done by direct lookup.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .cqparse import CQ
from .errors import ArityMismatch, TooLarge

SEARCH_LIMIT = 10 ** 8


@dataclass(frozen=True)
class AnswerSet:
    order: tuple[str, ...]
    rows: frozenset

    def __len__(self):
        return len(self.rows)

    def __contains__(self, t):
        return tuple(t) in self.rows

    def __iter__(self):
        return iter(sorted(self.rows))


def _atom_constraint(atom, structure):
    """(distinct vars, set of value tuples) for an atom, honouring repeated variables."""
    arity = structure.arity(atom.relation)
    if arity != len(atom.args):
        raise ArityMismatch(f"{atom} used with arity {arity}")
    distinct = tuple(dict.fromkeys(atom.args))
    out = set()
    for t in structure.tuples(atom.relation):
        val = {}
        ok = True
        for v, c in zip(atom.args, t):
            if val.setdefault(v, c) != c:
                ok = False
                break
        if ok:
            out.add(tuple(val[v] for v in distinct))
    return distinct, out


def solve(variables: Sequence[str], constraints: list, n: int, out_vars: Sequence[str],
          limit: int = SEARCH_LIMIT) -> set:
    """All projections onto ``out_vars`` of assignments satisfying every constraint.

    A constraint is (vars, set of tuples); a constraint over no variables
    is satisfied iff its set is nonempty. Variables absent from every
    constraint range over the whole domain ``0..n-1``.
    """
    variables = list(variables)
    if n ** len(variables) > limit:
        raise TooLarge(f"{n}^{len(variables)} valuations exceed the search limit {limit}")
    if any(not vs and not rel for vs, rel in constraints):
        return set()
    constraints = [(vs, rel) for vs, rel in constraints if vs]
    # most-constrained first, then first occurrence
    cover = {v: sum(v in vs for vs, _ in constraints) for v in variables}
    order = sorted(variables, key=lambda v: (-cover[v], variables.index(v)))
    depth_of = {v: i for i, v in enumerate(order)}
    # for each depth, the partial checks that become possible there
    checks = [[] for _ in order]
    for vs, rel in constraints:
        known = sorted(set(vs), key=depth_of.get)
        for j in range(len(known)):
            prefix = known[: j + 1]
            pos = [vs.index(v) for v in prefix]
            proj = {tuple(t[p] for p in pos) for t in rel}
            checks[depth_of[known[j]]].append((prefix, proj))
    # candidate values for a variable from its constraints' columns
    cands = []
    for v in order:
        vals = None
        for vs, rel in constraints:
            if v in vs:
                col = {t[vs.index(v)] for t in rel}
                vals = col if vals is None else vals & col
        cands.append(sorted(vals) if vals is not None else range(n))
    assign: dict[str, int] = {}
    out = set()

    def rec(d):
        if d == len(order):
            out.add(tuple(assign[v] for v in out_vars))
            return
        v = order[d]
        for c in cands[d]:
            assign[v] = c
            if all(tuple(assign[u] for u in pre) in proj for pre, proj in checks[d]):
                rec(d + 1)
        assign.pop(v, None)

    rec(0)
    return out


def brute_eval(q: CQ, structure) -> AnswerSet:
    cons = [_atom_constraint(a, structure) for a in q.atoms]
    return AnswerSet(q.free, frozenset(solve(q.variables, cons, structure.n, q.free)))


def _table_constraints(refinement) -> list:
    q = refinement.query
    return [(q.names(s), set(map(tuple, t.rows.tolist()))) for s, t in refinement.tables.items()]


def brute_eval_refined(refined, refinement) -> AnswerSet:
    """Answers of the base query conjoined with every table of ``refinement``.

    ``refined`` is the RefinedQuery (or None to derive it from the refinement).
    """
    q = refinement.query if refined is None else refined.base
    if refined is not None and frozenset(refinement.tables) != refined.family:
        raise ValueError("refinement tables do not match the refined query's family")
    st = refinement.structure
    cons = [_atom_constraint(a, st) for a in q.atoms] + _table_constraints(refinement)
    return AnswerSet(q.variables, frozenset(solve(q.variables, cons, st.n, q.variables)))


def brute_projected(q: CQ, structure, scope: Iterable[str], refinement=None) -> AnswerSet:
    """Answers of the query with every atom (and table) projected onto ``scope``."""
    scope_set = set(scope)
    ordered = tuple(v for v in q.variables if v in scope_set)
    cons = [_atom_constraint(a, structure) for a in q.atoms]
    if refinement is not None:
        cons += _table_constraints(refinement)
    projected = []
    for vs, rel in cons:
        keep = [i for i, v in enumerate(vs) if v in scope_set]
        projected.append((tuple(vs[i] for i in keep), {tuple(t[i] for i in keep) for t in rel}))
    return AnswerSet(ordered, frozenset(solve(ordered, projected, structure.n, ordered)))


# -- definitional checks on refinements ------------------------------------------


def _sets(k: int):
    for size in range(k + 1):
        for combo in itertools.combinations(range(k), size):
            yield sum(1 << i for i in combo)


def check_consistent(refinement) -> list[str]:
    """Violations of: every table equals its projected answers; nested tables project onto each other."""
    q, st = refinement.query, refinement.structure
    bad = []
    rows = {s: set(map(tuple, t.rows.tolist())) for s, t in refinement.tables.items()}
    for s in refinement.tables:
        names = q.names(s)
        expect = set(brute_projected(q, st, names, refinement).rows)
        if expect != rows[s]:
            bad.append(f"table {names} differs from its projected answers")
    for s in refinement.tables:
        for t in refinement.tables:
            if s != t and s & t == s:
                pos = [i for i, v in enumerate(q.names(t)) if s >> q.index(v) & 1]
                if {tuple(r[p] for p in pos) for r in rows[t]} != rows[s]:
                    bad.append(f"table {q.names(t)} does not project onto {q.names(s)}")
    return bad


def projected_counts(refinement) -> dict[int, int]:
    q, st = refinement.query, refinement.structure
    return {s: len(brute_projected(q, st, q.names(s), refinement)) for s in _sets(q.k)}


def check_m_consistent(refinement, M: int, counts=None) -> list[str]:
    q = refinement.query
    counts = counts or projected_counts(refinement)
    bad = []
    for s in _sets(q.k):
        small = all(counts[t] <= M for t in _sets(q.k) if t & s == t)
        if small != (s in refinement.tables):
            bad.append(f"{q.names(s)}: M-small={small}, member={s in refinement.tables}")
    return bad


def check_strongly_m_consistent(refinement, M: int, counts=None) -> list[str]:
    q = refinement.query
    counts = counts or projected_counts(refinement)
    bad = []
    fam = list(refinement.tables)
    for a, b in itertools.combinations(fam, 2):
        u = a | b
        if u not in refinement.tables and counts[u] <= M:
            bad.append(f"union of {q.names(a)} and {q.names(b)} has {counts[u]} <= M answers")
    return bad
