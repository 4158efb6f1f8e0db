import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cqenum.consistency import make_refinement, make_strongly_m_consistent
from cqenum.cqparse import parse_cq
from cqenum.decomp import brute_force_tds, enumerate_fc_tds, is_free_connex
from cqenum.errors import BadBase, EmptyTDList, NotNested, NotViolating, TrivialRefinement
from cqenum.fixtures import cycle_instance, random_query, random_structure
from cqenum.oracle import brute_eval, brute_eval_refined
from cqenum.splitting import (CostFunction, SplitStats, check_cost_properties, cost_eval, degrees,
                              is_uniform, m_bound, split_refinement, split_to_uniform,
                              width_under_g)

RELS = {"R": 2, "S": 2, "T": 3}


def test_degrees_on_cycle(cycle4, cyc4):
    r = make_strongly_m_consistent(cycle4, cyc4, 8)
    rep = degrees(r, ("x1",), ("x1", "x2"))
    # x1 ranges over 1..4 and b; b extends to 4 values of x2, the others only to a
    assert rep.avgdeg == Fraction(8, 5)
    assert rep.maxdeg == 4
    with pytest.raises(NotNested):
        degrees(r, ("x1",), ("x2", "x3"))


def test_trivial_refinement(cycle4, cyc4):
    r = make_refinement(cycle4, cyc4, {(): []})
    with pytest.raises(TrivialRefinement):
        is_uniform(r, 0.1, 8)


def test_split_partitions_the_smaller_table(cycle4, cyc4):
    r = make_strongly_m_consistent(cycle4, cyc4, 8)
    ok, pair = is_uniform(r, 0.1, 8)
    assert not ok
    low, high = split_refinement(r, pair[0], pair[1], 0.1, 8)
    s = pair[0]
    a, b = low.tables[s].as_set(), high.tables[s].as_set()
    assert a | b == r.tables[s].as_set() and not a & b
    with pytest.raises(NotViolating):
        split_refinement(r, pair[0], pair[1], 10.0, 8)


def test_m_bound():
    assert m_bound(8, 1.5) == 22          # floor(8 ** 1.5) = floor(22.6)
    assert m_bound(16, 1.5) == 64         # exact power survives float error
    assert m_bound(1, 2.0) == 4           # base 2 for tiny instances
    assert m_bound(2 ** 15, 1.1) == 92681


def test_split_cycle_into_two_sides():
    q = parse_cq("E12(x1,x2), E23(x2,x3), E34(x3,x4), E41(x4,x1)")
    for ell in (4, 16, 64):
        A = cycle_instance(ell)
        parts = split_to_uniform(q, A, 2.25, (1 / 3) ** 4)
        assert len(parts) == 2
        total = sum(len(brute_eval_refined(None, p)) for p in parts)
        assert total == len(brute_eval(q, A)) == 2 * ell ** 2


def test_disjoint_partition_random(rng):
    for _ in range(25):
        q = parse_cq(random_query(rng, max_vars=4, quantify=False))
        A = random_structure(rng, RELS, rng.randint(1, 5), max_tuples=25)
        st_ = SplitStats()
        parts = split_to_uniform(q, A, 1.5, 0.05, st_)
        assert st_.refinements == len(parts)
        sets = [brute_eval_refined(None, p).rows for p in parts]
        assert sum(len(s) for s in sets) == len(brute_eval(q, A))
        for i in range(len(sets)):
            for j in range(i):
                assert not sets[i] & sets[j]
        for p in parts:
            assert is_uniform(p, 0.05, A.m)[0]


def test_cost_function_basics(cycle4, cyc4):
    r = make_strongly_m_consistent(cycle4, cyc4, 8)
    cf = CostFunction(r, 1.5, 0.01, 8)
    assert cf(frozenset()) == 0.0
    # {x1,x2} has 8 rows = m, so log_m is 1
    u = frozenset({"x1", "x2"})
    assert cf(u) == pytest.approx((1 - 0.01 ** (1 / 3)) * 1 + 2 * 0.01 ** (2 / 3) * 2 - 0.01 * 4)
    outside = frozenset({"x1", "x2", "x3"})
    assert cf(outside) == pytest.approx((1 - 0.01 ** (1 / 3)) * 1.5 + cf.h(3))
    with pytest.raises(BadBase):
        cost_eval(CostFunction(r, 1.5, 0.01, 1), u)


def test_width_under_g_needs_candidates(cycle4):
    with pytest.raises(EmptyTDList):
        width_under_g(cycle4, len, [])


def test_quantified_cycle_lower_bound(cycle4q):
    """Counting only x2 and x4 gives cost 2 on every free-connex decomposition.

    The function is modular, monotone and costs at most 1 on every atom.
    """
    def g(U):
        return len(U & {"x2", "x4"})

    _, w = width_under_g(cycle4q, g, enumerate_fc_tds(cycle4q))
    assert w == 2
    small = [td for td in brute_force_tds(cycle4q, max_nodes=3) if is_free_connex(cycle4q, td)]
    assert small and min(max(g(b) for b in td.bags) for td in small) == 2


@given(st.integers(2, 10 ** 6), st.floats(1.0, 3.0))
@settings(max_examples=200, deadline=None)
def test_m_bound_is_floor(m, c):
    M = m_bound(m, c)
    assert M >= m
    assert M <= m ** c * (1 + 1e-9) + 1e-9
    assert M + 1 > m ** c * (1 - 1e-9) or M == m


def test_cost_properties_after_splitting(rng):
    for _ in range(15):
        q = parse_cq(random_query(rng, max_vars=5, quantify=False))
        A = random_structure(rng, RELS, rng.randint(2, 5), max_tuples=30)
        c, eps = 1.5, q.k ** -4.0
        for p in split_to_uniform(q, A, c, eps):
            assert check_cost_properties(CostFunction(p, c, eps, max(A.m, 2))) == []


def _unary16():
    from cqenum.relmodel import Structure
    A = Structure.from_tuples({"U": [(i,) for i in range(16)], "V": [(i,) for i in range(16)]})
    q = parse_cq("U(u), V(v)")
    return make_strongly_m_consistent(q, A, 16)


def test_cost_exact_values():
    r = _unary16()
    cf = CostFunction(r, 2.0, 1 / 4096, 16)
    assert cost_eval(cf, ("u",)) == pytest.approx(3871 / 4096, abs=1e-12)
    assert r.query.mask(("u", "v")) not in r.tables
    # (15/16)*2 + 2*(1/256)*2 - 4/4096
    assert cost_eval(cf, ("u", "v")) == pytest.approx(7740 / 4096, abs=1e-12)


def test_single_atom_width_at_most_one(rng):
    for _ in range(20):
        A = random_structure(rng, {"T": 3}, rng.randint(2, 5))
        q = parse_cq("T(x,y,z)")
        r = make_strongly_m_consistent(q, A, max(A.m, 1))
        cf = CostFunction(r, 1.5, 1 / 81, max(A.m, 2))
        tds = enumerate_fc_tds(q)
        assert len(tds) == 1
        _, w = width_under_g(q, cf, tds)
        assert w <= 1 + 1e-12


def test_all_below_threshold_gives_empty_high(cycle4, cyc4):
    r = make_strongly_m_consistent(cycle4, cyc4, 8)
    S, T = ("x1",), ("x1", "x2")
    # a huge eps puts every key below the threshold
    with pytest.raises(NotViolating):
        split_refinement(r, S, T, 5.0, 8)
