"""Enumeration and membership tests for free-connex acyclic queries, and
duplicate-free enumeration of a union of such indexes.

After a full semijoin reduction over a join tree rooted inside the connex
node set, every row of every node relation takes part in some answer.
Answers are then produced by a cursor walk over the connex nodes only;
each step looks up the bucket of rows agreeing with the parent node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .consistency import match_atom
from .cqparse import CQ
from .decomp import TreeDecomposition, build_join_tree, is_free_connex, validate_td
from .errors import DomainMismatch, NotAcyclic, NotFreeConnex, SchemaMismatch
from .relmodel import Structure
from .tables import Table, bits


class StepCounter:
    """Elementary steps: bucket lookups, cursor moves, membership probes and emissions."""

    __slots__ = ("steps",)

    def __init__(self):
        self.steps = 0


@dataclass(eq=False)
class EnumIndex:
    query: CQ
    free_order: tuple[str, ...]
    bags: list[int]                   # node -> variable mask
    edges: list[tuple[int, int]]
    connex: list[int]                 # connex nodes in preorder, root first
    parent: list[int]
    tables: list[Table]               # reduced node relations
    nonempty: bool
    # per connex position: (key variables, new variables, buckets or root rows)
    plan: list = field(default_factory=list)
    members: list = field(default_factory=list)   # per connex node: (variables, set of rows)

    def size(self) -> int:
        return sum(len(t) for t in self.tables)


# -- building the node tree --------------------------------------------------------


def _nodes_from_td(psi: CQ, atoms: list[Table], td: TreeDecomposition):
    valid = validate_td(psi, td)
    if not valid:
        raise NotAcyclic(f"decomposition is invalid: {valid.reason}")
    fc = is_free_connex(psi, td)
    if td.witness is not None and _covers(psi, td, td.witness):
        connex = td.witness
    elif fc:
        connex = fc.witness
    else:
        raise NotFreeConnex("decomposition has no connex node set for the free variables")
    bags, tables = [], []
    for b in td.bags:
        mask = psi.mask(b)
        cover = [a for a in atoms if a.mask & mask == mask]
        if not cover:
            raise NotAcyclic(f"bag {sorted(b)} is not covered by an atom")
        rel = min(cover, key=len).project(mask)
        for a in atoms:
            if a.mask & mask == a.mask:
                rel = rel.select(a.contains(rel.rows, mask))
        bags.append(mask)
        tables.append(rel)
    return bags, tables, list(td.edges), set(connex)


def _covers(psi: CQ, td: TreeDecomposition, nodes) -> bool:
    free = frozenset(psi.free)
    got = frozenset().union(*(td.bags[i] for i in nodes)) if nodes else frozenset()
    if got != free or any(not td.bags[i] <= free for i in nodes):
        return False
    if not nodes:
        return True
    adj = td.neighbours()
    seen = {min(nodes)}
    stack = [min(nodes)]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w in nodes and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen == set(nodes)


def _nodes_by_reduction(psi: CQ, atoms: list[Table]):
    """Join tree with projection nodes for the free variables.

    First quantified variables private to one edge are dropped and edges
    contained in another edge are hung below it. The remaining edges lie
    inside the free variables; each gets a projection node, and those
    nodes are joined into a tree by a second ear-removal pass.
    """
    free = psi.free_mask
    n = len(atoms)
    cur = [a.mask for a in atoms]
    alive = set(range(n))
    edges = []
    changed = True
    while changed:
        changed = False
        for i in sorted(alive):
            others = _union(cur[j] for j in alive if j != i)
            private = cur[i] & ~free & ~others
            if private:
                cur[i] &= ~private
                changed = True
        for i in sorted(alive, reverse=True):
            host = next((j for j in sorted(alive) if j != i and cur[i] & cur[j] == cur[i]), None)
            if host is not None:
                edges.append((host, i))
                alive.discard(i)
                changed = True
                break
    if any(cur[i] & ~free for i in alive):
        raise NotFreeConnex("quantified variables remain after ear removal "
                            "(query is cyclic or not free-connex)")
    bags = [a.mask for a in atoms]
    tables = list(atoms)
    proj = {}
    for i in sorted(alive):
        proj[i] = len(bags)
        bags.append(cur[i])
        tables.append(atoms[i].project(cur[i]))
        edges.append((i, proj[i]))
    # second pass over the free-only edges
    rest = set(alive)
    while len(rest) > 1:
        for i in sorted(rest, reverse=True):
            others = rest - {i}
            shared = cur[i] & _union(cur[j] for j in others)
            host = next((j for j in sorted(others) if shared & cur[j] == shared), None)
            if host is not None:
                edges.append((proj[host], proj[i]))
                rest.discard(i)
                break
        else:
            raise NotFreeConnex("free parts of the atoms are cyclic")
    connex = set(proj.values())
    return bags, tables, edges, connex


def _union(masks) -> int:
    out = 0
    for m in masks:
        out |= m
    return out


# -- preprocessing ---------------------------------------------------------------


def _semijoin(target: Table, source: Table) -> Table:
    shared = target.mask & source.mask
    return target.select(source.contains(target.rows, target.mask)) if shared else (
        target if len(source) else Table.empty(target.mask, target.n))


def preprocess_acyclic(psi: CQ, C: Structure, td: TreeDecomposition | None = None,
                       free_order: Sequence[str] | None = None) -> EnumIndex:
    """Reduce the node relations of a free-connex join tree and index the connex part.

    With ``td`` the decomposition's bags become the nodes (each must be
    covered by an atom); otherwise a join tree is derived from the atoms.
    """
    atoms = [match_atom(psi, a, C) for a in psi.atoms]
    if td is not None:
        bags, tables, edges, connex = _nodes_from_td(psi, atoms, td)
    else:
        build_join_tree(psi)  # raises NotAcyclic for cyclic hypergraphs
        bags, tables, edges, connex = _nodes_by_reduction(psi, atoms)
    free_order = tuple(free_order) if free_order is not None else psi.free
    if set(free_order) != set(psi.free) or len(free_order) != len(psi.free):
        raise DomainMismatch(f"output order {free_order} does not list the free variables {psi.free}")
    n = len(bags)
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    root = min(connex) if connex else 0
    parent = [-1] * n
    order = [root]
    seen = {root}
    # preorder that finishes the connex nodes before any other node
    stack = [root]
    while stack:
        u = stack.pop()
        for w in sorted(adj[u], key=lambda w: (w not in connex, w), reverse=True):
            if w not in seen:
                seen.add(w)
                parent[w] = u
                order.append(w)
                stack.append(w)
    if len(order) != n:
        raise NotAcyclic("node graph is not a tree")
    # full reduction: leaves to root, then root to leaves
    for u in reversed(order[1:]):
        p = parent[u]
        tables[p] = _semijoin(tables[p], tables[u])
    for u in order[1:]:
        tables[u] = _semijoin(tables[u], tables[parent[u]])
    nonempty = all(len(t) > 0 for t in tables)
    if not nonempty:
        tables = [Table.empty(b, C.n) for b in bags]

    connex_order = _preorder_within(root, adj, connex) if connex else []
    idx = EnumIndex(psi, free_order, bags, edges, connex_order, parent, tables, nonempty)
    _build_plan(idx)
    return idx


def _preorder_within(root, adj, nodes) -> list[int]:
    out = []
    stack = [root]
    seen = {root}
    while stack:
        u = stack.pop()
        out.append(u)
        for w in sorted(adj[u], reverse=True):
            if w in nodes and w not in seen:
                seen.add(w)
                stack.append(w)
    return out


def _build_plan(idx: EnumIndex):
    assigned = 0
    plan = []
    members = []
    for j, u in enumerate(idx.connex):
        t = idx.tables[u]
        cols = t.cols
        if j == 0:
            key_vars = ()
            new_vars = cols
            rows = list(map(tuple, t.rows.tolist()))
            plan.append((key_vars, new_vars, rows))
        else:
            key_mask = t.mask & idx.bags[idx.parent[u]]
            key_vars = bits(key_mask)
            new_vars = bits(t.mask & ~assigned)
            kpos = [cols.index(v) for v in key_vars]
            npos = [cols.index(v) for v in new_vars]
            buckets: dict[tuple, list] = {}
            for row in t.rows.tolist():
                buckets.setdefault(tuple(row[p] for p in kpos), []).append(tuple(row[p] for p in npos))
            # rows agreeing on the key may repeat on the new variables only if the
            # node adds nothing new; keep each extension once
            if not new_vars:
                buckets = {k: [()] for k in buckets}
            plan.append((key_vars, new_vars, buckets))
        assigned |= t.mask
        members.append((cols, set(map(tuple, t.rows.tolist()))))
    idx.plan = plan
    idx.members = members


# -- enumeration and testing ------------------------------------------------------


def enumerate_answers(idx: EnumIndex, counter: StepCounter | None = None) -> Iterator[tuple]:
    """Yield every answer once, as id tuples in ``idx.free_order``."""
    c = counter if counter is not None else StepCounter()
    if not idx.nonempty:
        c.steps += 1
        return
    q = idx.query
    out_vars = [q.index(v) for v in idx.free_order]
    depth = len(idx.plan)
    if depth == 0:
        c.steps += 1
        yield ()
        return
    assign = [0] * q.k
    lists = [None] * depth
    pos = [0] * depth
    lists[0] = idx.plan[0][2]
    last = depth - 1
    j = 0
    while True:
        lst = lists[j]
        if pos[j] < len(lst):
            row = lst[pos[j]]
            pos[j] += 1
            c.steps += 1
            for v, val in zip(idx.plan[j][1], row):
                assign[v] = val
            if j == last:
                c.steps += 1
                yield tuple(assign[v] for v in out_vars)
            else:
                j += 1
                key_vars, _, buckets = idx.plan[j]
                lists[j] = buckets[tuple(assign[v] for v in key_vars)]
                pos[j] = 0
                c.steps += 1
        else:
            j -= 1
            c.steps += 1
            if j < 0:
                return


def _as_tuple(idx: EnumIndex, b) -> tuple:
    if isinstance(b, dict):
        if set(b) != set(idx.free_order):
            raise DomainMismatch(f"mapping over {sorted(b)} but free variables are {idx.free_order}")
        return tuple(b[v] for v in idx.free_order)
    b = tuple(b)
    if len(b) != len(idx.free_order):
        raise DomainMismatch(f"tuple of length {len(b)} for {len(idx.free_order)} free variables")
    return b


def test(idx: EnumIndex, b, counter: StepCounter | None = None) -> bool:
    """Membership of a mapping (dict) or a tuple in ``free_order``."""
    t = _as_tuple(idx, b)
    if counter is not None:
        counter.steps += 1
    if not idx.nonempty:
        return False
    q = idx.query
    val = {q.index(v): x for v, x in zip(idx.free_order, t)}
    for cols, rows in idx.members:
        if counter is not None:
            counter.steps += 1
        if tuple(val[v] for v in cols) not in rows:
            return False
    return True


test.__test__ = False  # not a pytest test function


def union_enumerate(idxs: Sequence[EnumIndex], counter: StepCounter | None = None,
                    drain: str = "cursor") -> Iterator[tuple]:
    """Every answer of any index exactly once.

    ``cursor``: walk the union of the first j indexes; an item that index
    j+1 also contains is replaced by the next item of index j+1's own
    walk, and once the prefix is exhausted that walk simply continues.
    Items of index j+1 are therefore all emitted once and prefix items
    only when index j+1 lacks them. ``buffer``: same substitution, but
    substitutes are remembered in a set and a fresh walk of index j+1
    skips them. ``filter``: emit the prefix union, then the items of
    index j+1 that no earlier index contains.
    """
    if not idxs:
        return iter(())
    order = idxs[0].free_order
    for ix in idxs[1:]:
        if tuple(ix.free_order) != tuple(order):
            raise SchemaMismatch(f"free variables {ix.free_order} differ from {order}")
    c = counter if counter is not None else StepCounter()
    if drain not in ("cursor", "buffer", "filter"):
        raise ValueError(f"unknown drain mode {drain!r}")
    gen = enumerate_answers(idxs[0], c)
    for j in range(1, len(idxs)):
        if drain == "cursor":
            gen = _substitute(gen, idxs[j], c)
        elif drain == "buffer":
            gen = _substitute_buffered(gen, idxs[j], c)
        else:
            gen = _append_filtered(gen, idxs[:j], idxs[j], c)
    return gen


def _substitute(prefix: Iterator, nxt: EnumIndex, c: StepCounter) -> Iterator[tuple]:
    own = enumerate_answers(nxt, c)
    for t in prefix:
        if test(nxt, t, c):
            yield next(own)
        else:
            yield t
    yield from own


def _substitute_buffered(prefix: Iterator, nxt: EnumIndex, c: StepCounter) -> Iterator[tuple]:
    own = enumerate_answers(nxt, c)
    used = set()
    for t in prefix:
        if test(nxt, t, c):
            s = next(own)
            used.add(s)
            yield s
        else:
            yield t
    for t in enumerate_answers(nxt, c):
        c.steps += 1
        if t not in used:
            yield t


def _append_filtered(prefix: Iterator, before: Sequence[EnumIndex], nxt: EnumIndex,
                     c: StepCounter) -> Iterator[tuple]:
    yield from prefix
    for t in enumerate_answers(nxt, c):
        if not any(test(ix, t, c) for ix in before):
            yield t
