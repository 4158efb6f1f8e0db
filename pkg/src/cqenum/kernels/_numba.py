"""numba-compiled versions of the hot loops; same contracts as ``_numpy``."""

import numpy as np
from numba import njit


@njit(cache=True)
def expand_join(lo, counts):
    total = 0
    for i in range(counts.shape[0]):
        total += counts[i]
    left = np.empty(total, dtype=np.int64)
    right = np.empty(total, dtype=np.int64)
    k = 0
    for i in range(counts.shape[0]):
        base = lo[i]
        for j in range(counts[i]):
            left[k] = i
            right[k] = base + j
            k += 1
    return left, right


@njit(cache=True)
def horn_propagate(dead0, up_ptr, up_data, counters, counter_node, down_ptr, down_data):
    n = dead0.shape[0]
    dead = dead0.copy()
    cnt = counters.copy()
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    for u in range(n):
        if dead[u]:
            queue[tail] = u
            tail += 1
    for c in range(cnt.shape[0]):
        g = counter_node[c]
        if cnt[c] == 0 and not dead[g]:
            dead[g] = True
            queue[tail] = g
            tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        for e in range(up_ptr[u], up_ptr[u + 1]):
            c = up_data[e]
            cnt[c] -= 1
            if cnt[c] == 0:
                g = counter_node[c]
                if not dead[g]:
                    dead[g] = True
                    queue[tail] = g
                    tail += 1
        for e in range(down_ptr[u], down_ptr[u + 1]):
            h = down_data[e]
            if not dead[h]:
                dead[h] = True
                queue[tail] = h
                tail += 1
    return dead
