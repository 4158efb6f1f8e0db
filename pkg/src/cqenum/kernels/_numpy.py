"""Pure-numpy implementations of the hot loops."""

import numpy as np


def ranges(starts, counts):
    """Concatenation of ``arange(s, s + c)`` for every (s, c) pair."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    nz = counts > 0
    starts = np.asarray(starts, dtype=np.int64)[nz]
    counts = counts[nz]
    ends = np.cumsum(counts)
    step = np.ones(total, dtype=np.int64)
    step[0] = starts[0]
    # at each run boundary jump from the previous run's last value to the next start
    step[ends[:-1]] = starts[1:] - (starts[:-1] + counts[:-1] - 1)
    return np.cumsum(step)


def expand_join(lo, counts):
    left = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    right = ranges(lo, counts)
    return left, right


def _gather(ptr, data, idx):
    starts = ptr[idx]
    return data[ranges(starts, ptr[idx + 1] - starts)]


def horn_propagate(dead0, up_ptr, up_data, counters, counter_node, down_ptr, down_data):
    """Round-based least fixpoint of the deletion clauses.

    Each round takes the frontier of freshly deleted nodes, decrements the
    counters they feed and deletes their children; it stops when a round
    deletes nothing new.
    """
    dead = dead0.copy()
    counters = counters.copy()
    zero = counter_node[counters == 0]
    dead[zero] = True
    frontier = np.flatnonzero(dead)
    while frontier.size:
        cids = _gather(up_ptr, up_data, frontier)
        # work per round stays proportional to the frontier's edges
        hit, dec = np.unique(cids, return_counts=True)
        counters[hit] -= dec
        emptied = counter_node[hit[counters[hit] == 0]]
        kids = _gather(down_ptr, down_data, frontier)
        cand = np.concatenate((emptied, kids))
        cand = np.unique(cand[~dead[cand]])
        dead[cand] = True
        frontier = cand
    return dead
