"""Degree statistics, uniformity, degree splits and the bag cost function."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .consistency import ClosureStats, Refinement, make_strongly_m_consistent
from .cqparse import CQ
from .errors import (BadBase, DepthExceeded, EmptyTDList, NotNested, NotViolating,
                     TrivialRefinement)
from .relmodel import Structure
from .tables import popcount

log = logging.getLogger(__name__)

GUARD = 1e-12


@dataclass(frozen=True)
class DegreeReport:
    S: int
    T: int
    avgdeg: Fraction
    maxdeg: int
    counts: np.ndarray = field(repr=False, compare=False)


def _extension_counts(r: Refinement, S: int, T: int) -> np.ndarray:
    rs, rt = r.tables[S], r.tables[T]
    parent = np.searchsorted(rs.keys, rt.proj_keys(S))
    return np.bincount(parent, minlength=len(rs))


def degrees(r: Refinement, S, T) -> DegreeReport:
    S, T = r.mask(S), r.mask(T)
    if S & T != S:
        raise NotNested(f"{r.query.names(S)} is not contained in {r.query.names(T)}")
    if r.is_trivial():
        raise TrivialRefinement("refinement has an empty table")
    counts = _extension_counts(r, S, T)
    return DegreeReport(S, T, Fraction(len(r.tables[T]), len(r.tables[S])), int(counts.max()), counts)


def nested_pairs(r: Refinement):
    """Pairs S < T of the family ordered by (|S|, |T|, S, T)."""
    fam = sorted(r.tables, key=lambda s: (popcount(s), s))
    pairs = [(s, t) for s in fam for t in fam if s != t and s & t == s]
    return sorted(pairs, key=lambda p: (popcount(p[0]), popcount(p[1]), p[0], p[1]))


def _log_base(m) -> float:
    return math.log(max(int(m), 2))


def _exceeds(count: float, avg: Fraction, exponent: float, m) -> bool:
    """count > m**exponent * avg, decided in logs with a guard band."""
    lhs = math.log(count)
    rhs = exponent * _log_base(m) + math.log(avg.numerator) - math.log(avg.denominator)
    return lhs > rhs + GUARD


def first_violation(r: Refinement, eps: float, m: int):
    if r.is_trivial():
        raise TrivialRefinement("refinement has an empty table")
    for s, t in nested_pairs(r):
        rep = degrees(r, s, t)
        if _exceeds(rep.maxdeg, rep.avgdeg, eps, m):
            return rep
    return None


def is_uniform(r: Refinement, eps: float, m: int):
    """(True, None) or (False, (S, T)) for the first pair with too large a maximum degree."""
    rep = first_violation(r, eps, m)
    if rep is None:
        return True, None
    return False, (rep.S, rep.T)


def split_refinement(r: Refinement, S, T, eps: float, m: int) -> tuple[Refinement, Refinement]:
    """Split R_S by extension count at m**(eps/2) times the average degree.

    The first part keeps the low-degree mappings (ties included), the
    second the rest; all other tables are shared.
    """
    rep = degrees(r, S, T)
    if not _exceeds(rep.maxdeg, rep.avgdeg, eps, m):
        raise NotViolating(f"pair {r.query.names(rep.S)} < {r.query.names(rep.T)} is already uniform")
    counts = rep.counts.astype(float)
    lhs = np.log(np.maximum(counts, 1))
    rhs = (eps / 2) * _log_base(m) + math.log(rep.avgdeg.numerator) - math.log(rep.avgdeg.denominator)
    high = (lhs > rhs + GUARD) & (counts > 0)
    low_tab = r.tables[rep.S].select(~high)
    high_tab = r.tables[rep.S].select(high)
    a = dict(r.tables)
    a[rep.S] = low_tab
    b = dict(r.tables)
    b[rep.S] = high_tab
    return Refinement(r.ctx, a), Refinement(r.ctx, b)


def m_bound(m: int, c: float) -> int:
    """Largest integer not above m**c (and never below m)."""
    base = max(int(m), 2)
    # the slack absorbs float error when m**c is an exact integer
    return max(int(math.floor(base ** c * (1 + 1e-12))), int(m))


@dataclass
class SplitStats:
    refinements: int = 0
    splits: int = 0
    dropped: int = 0
    max_depth: int = 0
    closure: ClosureStats = field(default_factory=ClosureStats)


def split_to_uniform(q: CQ, structure: Structure, c: float, eps: float,
                     stats: SplitStats | None = None) -> list[Refinement]:
    """Disjoint family of strongly closed, uniform, non-trivial refinements.

    Depth-first: close the current refinement, split at the first
    violating pair, recurse on the low part then the high part.
    """
    st = stats if stats is not None else SplitStats()
    m = structure.m
    M = m_bound(m, c)
    k = q.k
    depth_cap = 2 ** k * math.ceil(c / eps)
    out = []
    root = make_strongly_m_consistent(q.strip_quantifiers(), structure, M, stats=st.closure)
    stack = [(root, 0)]
    while stack:
        r, depth = stack.pop()
        st.max_depth = max(st.max_depth, depth)
        if depth > depth_cap:
            raise DepthExceeded(f"split recursion deeper than {depth_cap}")
        if r.is_trivial() or any(len(a) == 0 for a in r.ctx.atoms):
            st.dropped += 1
            continue
        rep = first_violation(r, eps, m)
        if rep is None:
            out.append(r)
            continue
        st.splits += 1
        low, high = split_refinement(r, rep.S, rep.T, eps, m)
        parts = []
        for part in (low, high):
            if part.is_trivial():
                st.dropped += 1
                continue
            parts.append(make_strongly_m_consistent(None, None, M, start=part, stats=st.closure))
        for part in reversed(parts):
            stack.append((part, depth + 1))
    st.refinements = len(out)
    return out


# -- cost function ---------------------------------------------------------------


@dataclass(frozen=True)
class CostFunction:
    refinement: Refinement
    c: float
    eps: float
    m: int

    def h(self, size: int) -> float:
        return 2 * self.eps ** (2 / 3) * size - self.eps * size * size

    def __call__(self, U) -> float:
        return cost_eval(self, U)


def cost_eval(cf: CostFunction, U) -> float:
    r = cf.refinement
    mask = U if isinstance(U, int) else r.query.mask(U)
    if cf.m < 2:
        raise BadBase(f"logarithm base m={cf.m} must be at least 2")
    size = popcount(mask)
    if mask == 0:
        return 0.0
    scale = 1 - cf.eps ** (1 / 3)
    if mask in r.tables:
        n = len(r.tables[mask])
        if n == 0:
            log.warning("cost of %s evaluated on an empty table", r.query.names(mask))
            lg = 0.0
        else:
            lg = math.log(n) / math.log(cf.m)
        return scale * lg + cf.h(size)
    return scale * cf.c + cf.h(size)


def width_under_g(q: CQ, g: Callable, tds: Sequence, tiebreak: Callable | None = None):
    """Decomposition minimising its largest bag cost, with that cost.

    ``g`` takes a frozenset of variable names. ``tiebreak`` orders
    decompositions with equal cost (smaller wins).
    """
    if not tds:
        raise EmptyTDList("no decompositions to choose from")
    best = None
    for td in tds:
        cost = max(g(b) for b in td.bags)
        key = (cost, tiebreak(td) if tiebreak else 0)
        if best is None or key < best[0]:
            best = (key, td)
    return best[1], best[0][0]


def _all_masks(k):
    return range(1 << k)


def check_cost_properties(cf: CostFunction, tol: float = 1e-9) -> list[str]:
    """Monotonicity, edge domination, submodularity and g(empty)=0, exhaustively."""
    q = cf.refinement.query
    k = q.k
    g = [cost_eval(cf, u) for u in _all_masks(k)]
    bad = []
    if abs(g[0]) > tol:
        bad.append(f"g(empty) = {g[0]}")
    for u in _all_masks(k):
        for i in range(k):
            if not u >> i & 1 and g[u] > g[u | 1 << i] + tol:
                bad.append(f"not monotone at {q.names(u)} + {q.variables[i]}")
    for atom in q.atoms:
        if g[q.atom_mask(atom)] > 1 + tol:
            bad.append(f"atom {atom} costs {g[q.atom_mask(atom)]} > 1")
    for u, v in itertools.combinations(_all_masks(k), 2):
        if g[u] + g[v] < g[u & v] + g[u | v] - tol:
            bad.append(f"not submodular at {q.names(u)}, {q.names(v)}")
    return bad
