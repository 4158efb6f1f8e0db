import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cqenum import kernels
from cqenum.kernels import _numba, _numpy
from cqenum.tables import JoinStats, Table, join_filter


@pytest.fixture
def each_backend():
    prev = kernels.backend
    yield kernels.BACKENDS
    kernels.use_backend(prev)


@given(st.lists(st.integers(0, 5), max_size=30), st.integers(0, 50))
@settings(max_examples=100, deadline=None)
def test_expand_join_backends_agree(counts, base):
    counts = np.array(counts, dtype=np.int64)
    lo = (np.arange(len(counts), dtype=np.int64) * 3 + base)
    a = _numpy.expand_join(lo, counts)
    b = _numba.expand_join(lo, counts)
    exp_left = [i for i, c in enumerate(counts) for _ in range(c)]
    exp_right = [int(lo[i]) + j for i, c in enumerate(counts) for j in range(c)]
    for got in (a, b):
        assert got[0].tolist() == exp_left
        assert got[1].tolist() == exp_right


def _horn_oracle(dead0, up, counters, counter_node, down):
    dead = set(np.flatnonzero(dead0).tolist())
    cnt = list(counters)
    changed = True
    while changed:
        changed = False
        for c, g in enumerate(counter_node):
            live = cnt[c] - sum(1 for u in dead if c in up[u])
            if live <= 0 and g not in dead:
                dead.add(int(g))
                changed = True
        for u in list(dead):
            for h in down[u]:
                if h not in dead:
                    dead.add(h)
                    changed = True
    return dead


@given(st.data())
@settings(max_examples=80, deadline=None)
def test_horn_backends_agree_with_fixpoint(data):
    n = data.draw(st.integers(1, 12))
    nc = data.draw(st.integers(0, 8))
    # each counter watches a nonempty set of nodes; counters start at the set size
    watch = [data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=4)) for _ in range(nc)]
    counter_node = np.array([data.draw(st.integers(0, n - 1)) for _ in range(nc)], dtype=np.int64)
    down = [sorted(data.draw(st.sets(st.integers(0, n - 1), max_size=2))) for _ in range(n)]
    dead0 = np.array(data.draw(st.lists(st.booleans(), min_size=n, max_size=n)), dtype=np.bool_)
    up = [[c for c in range(nc) if u in watch[c]] for u in range(n)]
    up_ptr = np.zeros(n + 1, dtype=np.int64)
    up_ptr[1:] = np.cumsum([len(x) for x in up])
    up_data = np.array([c for x in up for c in x], dtype=np.int64)
    down_ptr = np.zeros(n + 1, dtype=np.int64)
    down_ptr[1:] = np.cumsum([len(x) for x in down])
    down_data = np.array([h for x in down for h in x], dtype=np.int64)
    counters = np.array([len(w) for w in watch], dtype=np.int64)
    exp = _horn_oracle(dead0, [set(x) for x in up], counters, counter_node, down)
    for mod in (_numpy, _numba):
        got = mod.horn_propagate(dead0, up_ptr, up_data, counters, counter_node, down_ptr, down_data)
        assert set(np.flatnonzero(got).tolist()) == exp


def test_join_filter_limit_and_backends(each_backend):
    rng = np.random.default_rng(0)
    a = Table(0b011, rng.integers(0, 6, size=(40, 2)), 6)
    b = Table(0b110, rng.integers(0, 6, size=(40, 2)), 6)
    exp = {(x, y, z) for x, y in a.as_set() for y2, z in b.as_set() if y == y2}
    for name in each_backend:
        kernels.use_backend(name)
        full = join_filter(a, b)
        assert full.as_set() == exp
        st_ = JoinStats()
        assert join_filter(a, b, limit=len(exp), stats=st_).as_set() == exp
        st_ = JoinStats()
        assert join_filter(a, b, limit=len(exp) - 1, stats=st_) is None
        assert st_.peak_chunk <= len(exp) and st_.peak_prefix <= len(exp)


def test_unit_and_empty_tables():
    u = Table.unit(5)
    assert len(u) == 1 and u.mask == 0
    e = Table.empty(0b11, 5)
    assert len(e) == 0
    assert join_filter(u, e).as_set() == set()
