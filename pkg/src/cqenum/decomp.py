"""Tree decompositions of queries: validation, free-connex witnesses,
enumeration through elimination orderings, and join trees for acyclic queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .cqparse import CQ
from .errors import InvalidTD, NotAcyclic, TooManyVariables

DEFAULT_VAR_CAP = 12


@dataclass(frozen=True)
class TreeDecomposition:
    bags: tuple[frozenset, ...]
    edges: tuple[tuple[int, int], ...] = ()
    witness: frozenset | None = None

    @classmethod
    def of(cls, bags: Iterable[Iterable[str]], edges: Iterable[tuple[int, int]] = (),
           witness: Iterable[int] | None = None) -> "TreeDecomposition":
        return cls(tuple(frozenset(b) for b in bags),
                   tuple((int(a), int(b)) for a, b in edges),
                   None if witness is None else frozenset(witness))

    def __len__(self):
        return len(self.bags)

    def neighbours(self) -> list[list[int]]:
        adj = [[] for _ in self.bags]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def canonical(self, order: dict | None = None):
        """Hashable form invariant under node renumbering (up to equal bags)."""
        key = (lambda v: order[v]) if order else (lambda v: v)
        sbag = [tuple(sorted(b, key=key)) for b in self.bags]
        perm = sorted(range(len(self.bags)), key=lambda i: (len(sbag[i]), sbag[i]))
        pos = {old: new for new, old in enumerate(perm)}
        edges = tuple(sorted(tuple(sorted((pos[a], pos[b]))) for a, b in self.edges))
        return tuple(sbag[i] for i in perm), edges

    def width(self) -> int:
        return max((len(b) for b in self.bags), default=0) - 1

    def to_text(self, q: CQ | None = None) -> str:
        key = q.index if q is not None else None
        lines = []
        for i, b in enumerate(self.bags):
            vs = sorted(b, key=key) if key else sorted(b)
            lines.append(f"node {i}: {' '.join(vs)}")
        for a, b in self.edges:
            lines.append(f"edge {a} {b}")
        if self.witness is not None:
            lines.append("connex " + " ".join(str(i) for i in sorted(self.witness)))
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "TreeDecomposition":
        bags: dict[int, frozenset] = {}
        edges = []
        witness = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            head, _, rest = line.partition(" ")
            if head == "node":
                idx, _, vs = rest.partition(":")
                bags[int(idx)] = frozenset(vs.split())
            elif head == "edge":
                a, b = rest.split()
                edges.append((int(a), int(b)))
            elif head == "connex":
                witness = frozenset(int(x) for x in rest.split())
            else:
                raise ValueError(f"bad decomposition line {raw!r}")
        if sorted(bags) != list(range(len(bags))):
            raise ValueError("nodes must be numbered 0..n-1")
        return cls(tuple(bags[i] for i in range(len(bags))), tuple(edges), witness)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str | None = None
    witness: frozenset | None = None

    def __bool__(self):
        return self.ok


def _is_tree(td: TreeDecomposition) -> str | None:
    n = len(td.bags)
    if n == 0:
        return "decomposition has no nodes"
    for a, b in td.edges:
        if not (0 <= a < n and 0 <= b < n) or a == b:
            return f"edge ({a}, {b}) is not between two distinct nodes"
    if len(td.edges) != n - 1:
        return f"{n} nodes need {n - 1} edges, got {len(td.edges)}"
    if len(_component(td.neighbours(), 0, set(range(n)))) != n:
        return "tree is not connected"
    return None


def _component(adj, start, allowed) -> set:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w in allowed and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def validate_td(q: CQ, td: TreeDecomposition) -> Verdict:
    """Check the tree shape, atom coverage and the path condition, in that order."""
    why = _is_tree(td)
    if why:
        return Verdict(False, why)
    known = set(q.variables)
    for i, b in enumerate(td.bags):
        if not b <= known:
            return Verdict(False, f"bag {i} uses unknown variables {sorted(b - known)}")
    for atom in q.atoms:
        if not any(atom.vars <= b for b in td.bags):
            return Verdict(False, f"atom {atom} is not covered by any bag")
    adj = td.neighbours()
    for v in q.variables:
        holders = {i for i, b in enumerate(td.bags) if v in b}
        if not holders:
            return Verdict(False, f"variable {v} occurs in no bag")
        if _component(adj, min(holders), holders) != holders:
            return Verdict(False, f"nodes holding {v} are not connected (path condition)")
    return Verdict(True)


def is_free_connex(q: CQ, td: TreeDecomposition) -> Verdict:
    """Find a connected node set whose bags cover exactly the free variables.

    Only nodes whose bag lies inside the free variables can take part, and
    a witness exists iff one connected component of those nodes covers
    all free variables; that component is returned.
    """
    valid = validate_td(q, td)
    if not valid:
        raise InvalidTD(valid.reason)
    free = frozenset(q.free)
    if not free:
        return Verdict(True, witness=frozenset())
    inside = {i for i, b in enumerate(td.bags) if b <= free}
    adj = td.neighbours()
    left = set(inside)
    while left:
        comp = _component(adj, min(left), inside)
        left -= comp
        cover = frozenset().union(*(td.bags[i] for i in comp))
        if cover == free:
            return Verdict(True, witness=frozenset(comp))
    return Verdict(False, "no connected set of free-only bags covers the free variables")


# -- enumeration -----------------------------------------------------------------


def _adjacency(q: CQ) -> list[int]:
    adj = [0] * q.k
    for atom in q.atoms:
        m = q.atom_mask(atom)
        for i in range(q.k):
            if m >> i & 1:
                adj[i] |= m & ~(1 << i)
    return adj


def _reach(adj: list[int], v: int, eliminated: int) -> int:
    """Vertices outside ``eliminated`` joined to v by a path through eliminated vertices."""
    seen = 1 << v
    frontier = [v]
    out = 0
    while frontier:
        u = frontier.pop()
        nb = adj[u] & ~seen
        seen |= nb
        out |= nb & ~eliminated
        inner = nb & eliminated
        while inner:
            low = inner & -inner
            frontier.append(low.bit_length() - 1)
            inner ^= low
    return out


def _subset(a: int, b: int) -> bool:
    return a & b == a


def _dominates(better: tuple, worse: tuple) -> bool:
    """Every bag of ``better`` fits inside some bag of ``worse``."""
    wb = [b for b, _ in worse[0]]
    return all(any(_subset(b, w) for w in wb) for b, _ in better[0])


def _canon(nodes: list, edges: list) -> tuple:
    perm = sorted(range(len(nodes)), key=lambda i: nodes[i])
    pos = {old: new for new, old in enumerate(perm)}
    return (tuple(nodes[i] for i in perm),
            tuple(sorted(tuple(sorted((pos[a], pos[b]))) for a, b in edges)))


def _attach(td: tuple, v: int, nb: int, in_f: bool) -> tuple:
    nodes = list(td[0])
    edges = list(td[1])
    new = nb | 1 << v
    if not nodes:
        return _canon([(new, in_f)], [])
    for i, (bag, f) in enumerate(nodes):
        if bag == nb and (in_f or not f):
            nodes[i] = (new, f)
            return _canon(nodes, edges)
    hosts = [i for i, (bag, _) in enumerate(nodes) if _subset(nb, bag)]
    if not hosts:  # cannot happen for elimination bags; kept as a guard
        raise InvalidTD("no bag holds the neighbourhood of an eliminated variable")
    host = min(hosts, key=lambda i: (bin(nodes[i][0]).count("1"), nodes[i][0]))
    nodes.append((new, in_f))
    edges.append((host, len(nodes) - 1))
    return _canon(nodes, edges)


def enumerate_fc_tds(q: CQ, cap: int = DEFAULT_VAR_CAP, minimal: bool = True) -> list[TreeDecomposition]:
    """Free-connex decompositions obtained from elimination orderings that
    eliminate quantified variables before free ones.

    The decompositions are built from the last eliminated variable
    backwards: each new variable's bag (itself plus the variables it
    reaches through earlier-eliminated ones) hangs off a node containing
    that neighbourhood, or absorbs a node equal to it. Free variables get
    the connex nodes. For every free-connex decomposition of ``q`` some
    listed decomposition has each of its bags inside one of its bags.

    With ``minimal`` (default) decompositions whose bags are all covered
    by another candidate's bags are dropped, which never changes a
    min-max over monotone bag costs.
    """
    if q.k > cap:
        raise TooManyVariables(f"{q.k} variables exceed the cap of {cap}")
    adj = _adjacency(q)
    full = q.all_mask
    free = q.free_mask
    states = {0: {((), ())}}
    for _ in range(q.k):
        nxt: dict[int, set] = {}
        for done, tds in states.items():
            pick = free & ~done if not _subset(free, done) else full & ~done
            eliminated_base = full & ~done
            v_bits = pick
            while v_bits:
                low = v_bits & -v_bits
                v = low.bit_length() - 1
                v_bits ^= low
                nb = _reach(adj, v, eliminated_base & ~low)
                bucket = nxt.setdefault(done | low, set())
                for td in tds:
                    bucket.add(_attach(td, v, nb, bool(free >> v & 1)))
        if minimal:
            nxt = {d: _prune(tds) for d, tds in nxt.items()}
        states = nxt
    final = states.get(full, set())
    out = []
    for nodes, edges in sorted(final, key=lambda t: (len(t[0]), t)):
        bags = tuple(frozenset(q.names(b)) for b, _ in nodes)
        wit = frozenset(i for i, (_, f) in enumerate(nodes) if f)
        out.append(TreeDecomposition(bags, edges, wit))
    return out


def _prune(tds: set) -> set:
    tds = list(tds)
    keep = set()
    for i, a in enumerate(tds):
        beaten = False
        for j, b in enumerate(tds):
            if i == j:
                continue
            if _dominates(b, a) and not _dominates(a, b):
                beaten = True
                break
        if not beaten:
            keep.add(a)
    return keep


def brute_force_tds(q: CQ, max_nodes: int = 3) -> list[TreeDecomposition]:
    """Every decomposition with at most ``max_nodes`` nodes (exhaustive, tiny queries only)."""
    import itertools

    k = q.k
    masks = range(1, 1 << k)
    out = []
    for n in range(1, max_nodes + 1):
        trees = _labelled_trees(n)
        for bags in itertools.combinations_with_replacement(masks, n):
            for edges in trees:
                td = TreeDecomposition(tuple(frozenset(q.names(b)) for b in bags), edges)
                if validate_td(q, td):
                    out.append(td)
    return out


def _labelled_trees(n: int) -> list[tuple]:
    """All labelled trees on n nodes via Pruefer sequences."""
    import itertools

    if n == 1:
        return [()]
    if n == 2:
        return [((0, 1),)]
    trees = []
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for x in seq:
            degree[x] += 1
        edges = []
        seq = list(seq)
        for x in seq:
            leaf = min(i for i in range(n) if degree[i] == 1)
            edges.append((leaf, x))
            degree[leaf] -= 1
            degree[x] -= 1
        u, w = [i for i in range(n) if degree[i] == 1]
        edges.append((u, w))
        trees.append(tuple(edges))
    return trees


# -- join trees ------------------------------------------------------------------


@dataclass(frozen=True)
class JoinTree:
    query: CQ
    parent: tuple[int, ...]          # parent atom index, -1 for the root
    root: int
    children: tuple[tuple[int, ...], ...] = field(default=())

    def edges(self):
        return [(p, c) for c, p in enumerate(self.parent) if p >= 0]


def build_join_tree(q: CQ, root_hint: int | None = None) -> JoinTree:
    """GYO ear removal: an atom whose variables shared with the rest fit in another atom hangs below it."""
    n = len(q.atoms)
    vs = [q.atom_mask(a) for a in q.atoms]
    alive = set(range(n))
    parent = [-1] * n
    while len(alive) > 1:
        found = False
        for e in sorted(alive, reverse=True):
            if e == root_hint:
                continue
            others = alive - {e}
            shared = vs[e] & _union(vs[o] for o in others)
            host = next((f for f in sorted(others) if _subset(shared, vs[f])), None)
            if host is not None:
                parent[e] = host
                alive.discard(e)
                found = True
                break
        if not found:
            raise NotAcyclic(f"no join tree: atoms {[str(q.atoms[i]) for i in sorted(alive)]} form a cycle")
    root = alive.pop()
    children = [[] for _ in range(n)]
    for c, p in enumerate(parent):
        if p >= 0:
            children[p].append(c)
    return JoinTree(q, tuple(parent), root, tuple(tuple(c) for c in children))


def _union(masks) -> int:
    out = 0
    for m in masks:
        out |= m
    return out


def running_intersection(q: CQ, jt: JoinTree) -> bool:
    adj = [[] for _ in q.atoms]
    for p, c in jt.edges():
        adj[p].append(c)
        adj[c].append(p)
    for v in q.variables:
        holders = {i for i, a in enumerate(q.atoms) if v in a.args}
        if holders and _component(adj, min(holders), holders) != holders:
            return False
    return True
