"""Refinements: expansion tables, consistency repair and the small-set closure.

Variable sets are bitmasks over the query's variable indices. A
refinement maps every set of its family to a ``Table`` of partial
assignments over that set.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import kernels
from .cqparse import CQ, Atom, refine_query
from .errors import ArityMismatch, BadM, ScopeError
from .relmodel import Structure
from .tables import JoinStats, Table, bits, join_filter, join_size, popcount

log = logging.getLogger(__name__)


def match_atom(q: CQ, atom: Atom, structure: Structure) -> Table:
    """Tuples of the atom's relation that respect its repeated variables,
    projected onto its distinct variables."""
    arity = structure.arity(atom.relation)
    if arity != len(atom.args):
        raise ArityMismatch(f"{atom} has {len(atom.args)} arguments, {atom.relation} has arity {arity}")
    rows = structure.rows(atom.relation)
    first: dict[str, int] = {}
    for p, v in enumerate(atom.args):
        first.setdefault(v, p)
    keep = np.ones(len(rows), dtype=bool)
    for p, v in enumerate(atom.args):
        if first[v] != p:
            keep &= rows[:, p] == rows[:, first[v]]
    distinct = sorted(first, key=q.index)
    cols = rows[keep][:, [first[v] for v in distinct]]
    return Table(q.mask(distinct), cols, structure.n)


class Context:
    """A quantifier-free query bound to a structure, with matched atom tables."""

    def __init__(self, query: CQ, structure: Structure):
        if query.quantified:
            query = query.strip_quantifiers()
        self.query = query
        self.structure = structure
        self.n = structure.n
        self.atoms = [match_atom(query, a, structure) for a in query.atoms]
        self.m = structure.m

    @property
    def k(self):
        return self.query.k


def member(constraints: Iterable[Table], rows: np.ndarray, mask: int) -> np.ndarray:
    """Rows over ``mask`` that satisfy every constraint projected onto ``mask``."""
    idx = np.arange(rows.shape[0])
    for t in constraints:
        if not idx.size:
            break
        if t.mask & mask == 0:
            if len(t) == 0:
                idx = idx[:0]
            continue
        idx = idx[t.contains(rows[idx], mask)]
    keep = np.zeros(rows.shape[0], dtype=bool)
    keep[idx] = True
    return keep


@dataclass(frozen=True, eq=False)
class Refinement:
    ctx: Context
    tables: Mapping[int, Table]

    @property
    def query(self) -> CQ:
        return self.ctx.query

    @property
    def structure(self) -> Structure:
        return self.ctx.structure

    @property
    def family(self) -> frozenset:
        return frozenset(self.tables)

    def mask(self, s) -> int:
        return s if isinstance(s, int) else self.query.mask(s)

    def table(self, s) -> Table:
        return self.tables[self.mask(s)]

    def constraints(self):
        return itertools.chain(self.ctx.atoms, self.tables.values())

    def projected_answers(self, s) -> Table:
        """The answer table of the refined query projected onto ``s``.

        Built by joining the projected constraints one at a time; meant
        for checks and small inputs, not for the hot path.
        """
        mask = self.mask(s)
        cons = [t.project(t.mask & mask) for t in self.constraints()]
        if any(len(t) == 0 for t in cons):
            return Table.empty(mask, self.ctx.n)
        acc = Table.unit(self.ctx.n)
        for t in sorted((t for t in cons if t.mask), key=len):
            acc = join_filter(acc, t)
        if acc.mask != mask:  # variables without any constraint cannot occur
            raise ScopeError("set mentions variables outside the query")
        return acc

    def is_trivial(self) -> bool:
        return any(len(t) == 0 for t in self.tables.values())

    def sizes(self) -> dict[tuple, int]:
        return {self.query.names(s): len(t) for s, t in sorted(self.tables.items())}

    def refined_query(self):
        return refine_query(self.query, self.tables)

    def total_size(self) -> int:
        return sum(len(t) for t in self.tables.values())

    def dump(self) -> str:
        lines = []
        for s, t in sorted(self.tables.items(), key=lambda kv: (popcount(kv[0]), kv[0])):
            lines.append(f"{{{','.join(self.query.names(s))}}}\t{len(t)}")
        return "\n".join(lines)


def make_refinement(query: CQ, structure: Structure, tables: Mapping | None = None) -> Refinement:
    """Wrap user-supplied tables (keys: masks or variable-name tuples, values: row arrays)."""
    ctx = Context(query, structure)
    q = ctx.query
    out = {}
    for key, val in (tables or {}).items():
        mask = key if isinstance(key, int) else q.mask(key)
        if not isinstance(val, Table):
            w = popcount(mask)
            rows = list(val)
            val = Table(mask, np.asarray(rows, dtype=np.int64).reshape(len(rows), w), ctx.n)
        out[mask] = val
    refine_query(q, out)  # validates subset closure and scope
    return Refinement(ctx, out)


# -- consistency ----------------------------------------------------------------


@dataclass
class HornInstance:
    """Size bookkeeping of the deletion clauses built by ``make_consistent``."""

    variables: int = 0
    pairs: int = 0
    clauses_up: int = 0      # one per (pair, g): d_S^g <- all extensions deleted
    clauses_down: int = 0    # one per (pair, h): d_T^h <- d_S^g
    literals: int = 0
    deleted: int = 0

    @property
    def clauses(self) -> int:
        return self.clauses_up + self.clauses_down


def _csr(src: np.ndarray, dst: np.ndarray, n: int):
    order = np.argsort(src, kind="stable")
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=ptr[1:])
    return ptr, dst[order].astype(np.int64)


def make_consistent(r: Refinement, horn: HornInstance | None = None) -> Refinement:
    """Shrink every table to its projected answers and make nested tables agree.

    The deletions are the least model of the Horn clauses
    ``d_S^g <- AND d_T^h`` (all extensions of g deleted) and
    ``d_T^h <- d_S^g`` over every nested pair S < T of the family.
    """
    ctx = r.ctx
    masks = sorted(r.tables, key=lambda s: (popcount(s), s))
    # first pass: drop rows outside their projected answer set
    cons = list(r.constraints())
    tabs = {s: r.tables[s].select(member(cons, r.tables[s].rows, s)) for s in masks}

    base = {}
    total = 0
    for s in masks:
        base[s] = total
        total += len(tabs[s])
    srcs_up, dsts_up, srcs_dn, dsts_dn = [], [], [], []
    counters, counter_node = [], []
    dead0 = np.zeros(total, dtype=bool)
    ncount = 0
    h = horn if horn is not None else HornInstance()
    h.variables = total
    for t in masks:
        tt = tabs[t]
        for s in masks:
            if s == t or s & t != s:
                continue
            st = tabs[s]
            h.pairs += 1
            probe = tt.proj_keys(s)
            hay = st.keys
            parent = np.searchsorted(hay, probe)
            ok = parent < len(hay)
            ok[ok] = hay[parent[ok]] == probe[ok]
            if not ok.all():
                dead0[base[t] + np.flatnonzero(~ok)] = True
            parent = np.where(ok, parent, 0)
            cnt = np.bincount(parent[ok], minlength=len(st)).astype(np.int64)
            counters.append(cnt)
            counter_node.append(base[s] + np.arange(len(st), dtype=np.int64))
            tnodes = base[t] + np.flatnonzero(ok)
            srcs_up.append(tnodes)
            dsts_up.append(ncount + parent[ok])
            srcs_dn.append(base[s] + parent[ok])
            dsts_dn.append(tnodes)
            ncount += len(st)
            nok = int(ok.sum())
            h.clauses_up += len(st)
            h.clauses_down += nok
            h.literals += len(st) + nok + 2 * nok

    def cat(xs):
        return np.concatenate(xs) if xs else np.empty(0, dtype=np.int64)

    up_ptr, up_data = _csr(cat(srcs_up), cat(dsts_up), total)
    dn_ptr, dn_data = _csr(cat(srcs_dn), cat(dsts_dn), total)
    dead = kernels.horn_propagate(dead0, up_ptr, up_data, cat(counters),
                                  cat(counter_node), dn_ptr, dn_data)
    h.deleted = int(dead.sum())
    out = {s: tabs[s].select(~dead[base[s]:base[s] + len(tabs[s])]) for s in masks}
    # an empty table referenced by the refined query empties the whole answer set
    if any(len(t) == 0 for t in out.values()) or any(len(a) == 0 for a in ctx.atoms):
        out = {s: Table.empty(s, ctx.n) for s in masks}
    return Refinement(ctx, out)


# -- small-set closure ------------------------------------------------------------


@dataclass
class ClosureStats:
    rounds: int = 0
    step1_added: int = 0
    step2_added: int = 0
    subsets_added: int = 0
    fallbacks: int = 0
    joins: JoinStats = field(default_factory=JoinStats)
    horn: list = field(default_factory=list)


def _masks_by_size(k: int):
    for size in range(k + 1):
        for combo in itertools.combinations(range(k), size):
            yield sum(1 << i for i in combo)


def _projected(ctx: Context, tables: dict, mask: int, limit: int, stats: JoinStats) -> Table | None:
    """Answers of the refined query projected on ``mask``, or None if more than ``limit``.

    Requires ``mask`` minus its lowest variable to be in ``tables``;
    candidates extend that table by the cheapest constraint on the variable.
    """
    cons = list(itertools.chain(ctx.atoms, tables.values()))
    if mask == 0:
        if all(len(t) > 0 for t in cons):
            return Table.unit(ctx.n) if limit >= 1 else None
        return Table.empty(0, ctx.n)
    x = mask & -mask
    rest = tables[mask & ~x]
    gens = [t.project(t.mask & mask) for t in cons if t.mask & x]
    gen = min(gens, key=lambda g: (join_size(rest, g), len(g)))
    return join_filter(rest, gen, accept=lambda rows, m: member(cons, rows, m),
                       limit=limit, stats=stats)


def _union_answers(ctx: Context, tables: dict, a: int, b: int, M: int,
                   st: ClosureStats) -> Table | None:
    """Answers projected on the union of two members, or None past ``M``.

    Every answer joins a row of R_a with a row of R_b, so scanning that
    join finds them all. To avoid walking a huge join with few survivors,
    the union is first built up constraint by constraint from the smaller
    table, always taking the cheapest extension. If an intermediate set
    overflows ``M`` the direct scan is used instead.
    """
    u = a | b
    cons = list(itertools.chain(ctx.atoms, tables.values()))

    def accept(rows, m):
        return member(cons, rows, m)

    w = a if len(tables[a]) <= len(tables[b]) else b
    acc = tables[w]
    while w != u:
        best = None
        for t in cons:
            add = t.mask & u & ~w
            if not add:
                continue
            gen = t.project(t.mask & u)
            size = join_size(acc, gen)
            if best is None or size < best[0]:
                best = (size, gen)
        gen = best[1]
        acc = join_filter(acc, gen, accept=accept, limit=M, stats=st.joins)
        w |= gen.mask
        if acc is None:
            if w == u:
                return None
            st.fallbacks += 1
            return join_filter(tables[a], tables[b], accept=accept, limit=M, stats=st.joins)
    return acc


def make_strongly_m_consistent(query: CQ, structure: Structure | None, M: int,
                               start: Refinement | None = None,
                               stats: ClosureStats | None = None) -> Refinement:
    """Grow the family by small sets, certify large unions, repair consistency; repeat.

    With ``start`` the loop resumes from an existing refinement (its
    structure and tables), which is how the splitter re-closes each part.
    """
    if start is not None:
        ctx = start.ctx
        tables = dict(start.tables)
    else:
        ctx = Context(query, structure)
        tables = {}
    if M < ctx.m:
        raise BadM(f"M={M} is smaller than the largest relation ({ctx.m} tuples)")
    st = stats if stats is not None else ClosureStats()
    k = ctx.k
    order = list(_masks_by_size(k))
    while True:
        st.rounds += 1
        changed = False
        # step 1: add every set whose proper subsets are in and whose answers fit
        for s in order:
            if s in tables:
                continue
            if any((s & ~(1 << i)) not in tables for i in bits(s)):
                continue
            got = _projected(ctx, tables, s, M, st.joins)
            if got is not None:
                tables[s] = got
                changed = True
                st.step1_added += 1
        # step 2: unions of members, abandoned as soon as they exceed M
        large: set[int] = set()
        members = sorted(tables, key=lambda s: (popcount(s), s))
        for a, b in itertools.combinations(members, 2):
            u = a | b
            if u in tables or u in large:
                continue
            got = _union_answers(ctx, tables, a, b, M, st)
            if got is None:
                large.add(u)
                continue
            tables[u] = got
            st.step2_added += 1
            # keep the family closed under subsets
            for sub in _submasks(u):
                if sub not in tables:
                    tables[sub] = got.project(sub)
                    st.subsets_added += 1
            changed = True
            large.clear()
        # step 3
        horn = HornInstance()
        ref = make_consistent(Refinement(ctx, tables), horn)
        st.horn.append(horn)
        tables = dict(ref.tables)
        if not changed:
            return ref


def _submasks(mask: int):
    sub = (mask - 1) & mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask
