"""End-to-end preprocessing: split the instance into uniform refinements, pick a
cheap free-connex decomposition per refinement, and index each resulting
acyclic instance for enumeration and testing."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator

from .consistency import Refinement
from .cqparse import CQ, Atom, table_name
from .decomp import TreeDecomposition, enumerate_fc_tds
from .enumerate import (EnumIndex, StepCounter, enumerate_answers, preprocess_acyclic,
                        test as index_test, union_enumerate)
from .errors import DomainMismatch, WidthExceeded
from .relmodel import Structure
from .splitting import CostFunction, SplitStats, m_bound, split_to_uniform, width_under_g

log = logging.getLogger(__name__)

TOL = 1e-12


@dataclass(frozen=True)
class PipelineParams:
    w: float
    delta: float
    k: int

    def __post_init__(self):
        if not self.w >= 1:
            raise ValueError(f"w must be at least 1, got {self.w}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def c(self) -> float:
        return (1 + self.delta) * self.w

    @property
    def eps(self) -> float:
        a = (1 - 1 / (1 + self.delta)) ** 4
        return min(a, max(self.k, 1) ** -4.0)


@dataclass(eq=False)
class Instance:
    """One refinement together with its selected decomposition and acyclic index."""

    refinement: Refinement
    td: TreeDecomposition
    cost: float
    query: CQ               # one atom per bag, named after the bag table
    structure: Structure    # exactly the bag tables
    index: EnumIndex

    def bag_sizes(self) -> dict[frozenset, int]:
        return {b: len(self.structure.rows(a.relation))
                for b, a in zip(self.td.bags, self.query.atoms)}


@dataclass(eq=False)
class QueryIndex:
    query: CQ
    params: PipelineParams
    instances: list[Instance]
    free_order: tuple[str, ...]
    domain_size: int
    split: SplitStats = field(default_factory=SplitStats)
    n_tds: int = 0
    M: int = 0

    def enumerate(self, counter: StepCounter | None = None, drain: str = "cursor") -> Iterator[tuple]:
        return enumerate_query(self, counter, drain)

    def test(self, b, counter: StepCounter | None = None) -> bool:
        return test_query(self, b, counter)


def _bag_instance(q: CQ, r: Refinement, td: TreeDecomposition):
    rq = r.query
    atoms, arrays = [], {}
    for bag in td.bags:
        mask = rq.mask(bag)
        name = table_name(rq, mask)
        atoms.append(Atom(name, rq.names(mask)))
        arrays[name] = r.tables[mask].rows
    quantified = tuple(v for v in q.quantified)
    psi = CQ(tuple(atoms), quantified)
    st = r.structure
    C = Structure.from_arrays(arrays, st.domain, st._index)
    return psi, C


def preprocess(phi: CQ, A: Structure, w: float, delta: float, tds=None) -> QueryIndex:
    """Build the enumeration and testing index for ``phi`` over ``A``.

    Raises WidthExceeded when some refinement has no listed free-connex
    decomposition whose bag costs all stay within ``w``.
    """
    params = PipelineParams(w, delta, phi.k)
    if tds is None:
        tds = enumerate_fc_tds(phi)
    m = A.m
    stats = SplitStats()
    refinements = split_to_uniform(phi.strip_quantifiers(), A, params.c, params.eps, stats)
    log.info("%d refinements (c=%.4g, eps=%.3g)", len(refinements), params.c, params.eps)
    instances = []
    for i, r in enumerate(refinements):
        cf = CostFunction(r, params.c, params.eps, max(m, 2))
        rq = r.query

        def size_of(td, r=r, rq=rq):
            return sum(len(r.tables.get(rq.mask(b), ())) if rq.mask(b) in r.tables else math.inf
                       for b in td.bags)

        td, cost = width_under_g(phi, cf, tds, tiebreak=size_of)
        missing = [b for b in td.bags if rq.mask(b) not in r.tables]
        if cost > w + TOL or missing:
            raise WidthExceeded(
                f"refinement {i} has no decomposition of cost <= {w}; best is {cost:.6g}",
                refinement_index=i, best_cost=cost)
        psi, C = _bag_instance(phi, r, td)
        idx = preprocess_acyclic(psi, C, td=td, free_order=phi.free)
        instances.append(Instance(r, td, cost, psi, C, idx))
    return QueryIndex(phi, params, instances, phi.free, A.n, stats, len(tds), m_bound(m, params.c))


def enumerate_query(qi: QueryIndex, counter: StepCounter | None = None,
                    drain: str = "cursor") -> Iterator[tuple]:
    if not qi.instances:
        return iter(())
    return union_enumerate([inst.index for inst in qi.instances], counter, drain)


def test_query(qi: QueryIndex, b, counter: StepCounter | None = None) -> bool:
    # validated here too, since an empty union has no index to complain
    if isinstance(b, dict):
        if set(b) != set(qi.free_order):
            raise DomainMismatch(f"mapping over {sorted(b)} but free variables are {qi.free_order}")
    elif len(tuple(b)) != len(qi.free_order):
        raise DomainMismatch(f"tuple of length {len(tuple(b))} for {len(qi.free_order)} free variables")
    return any(index_test(inst.index, b, counter) for inst in qi.instances)


test_query.__test__ = False
