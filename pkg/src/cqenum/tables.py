"""Mapping-set tables over variable bitmasks.

A ``Table`` holds a set of partial assignments with a common domain.
Columns follow increasing variable index; rows are unique and sorted
lexicographically. Tables are never mutated, so projections and sort
orders are cached on the object.
"""

from __future__ import annotations

import numpy as np

from . import kernels

_RADIX_LIMIT = 1 << 62


def bits(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def encode(cols: np.ndarray, n: int) -> np.ndarray:
    """Order-preserving keys for the rows of ``cols``.

    Rows become base-``n`` integers when they fit in 62 bits and a
    structured record view otherwise; both sort lexicographically and
    work with ``searchsorted``.
    """
    r, w = cols.shape
    if w == 0:
        return np.zeros(r, dtype=np.int64)
    base = max(int(n), 2)
    if base ** w < _RADIX_LIMIT:
        key = cols[:, 0].astype(np.int64, copy=True)
        for j in range(1, w):
            key *= base
            key += cols[:, j]
        return key
    dt = np.dtype([(f"c{j}", "<i8") for j in range(w)])
    return np.ascontiguousarray(cols, dtype=np.int64).view(dt).ravel()


class Table:
    __slots__ = ("mask", "cols", "rows", "n", "_keys", "_proj", "_uniq", "_sorted", "_sub")

    def __init__(self, mask: int, rows: np.ndarray, n: int, canonical: bool = False):
        self.mask = mask
        self.cols = bits(mask)
        self.n = n
        rows = np.asarray(rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != len(self.cols):
            rows = rows.reshape(-1, len(self.cols))
        self._proj = {}
        self._uniq = {}
        self._sorted = {}
        self._sub = {}
        if canonical or len(rows) <= 1:
            self.rows = rows
            self._keys = None
        else:
            keys = encode(rows, n)
            uniq, first = np.unique(keys, return_index=True)
            self.rows = rows[first]
            self._keys = uniq
        self.rows.flags.writeable = False

    @classmethod
    def empty(cls, mask: int, n: int) -> "Table":
        return cls(mask, np.empty((0, popcount(mask)), dtype=np.int64), n, canonical=True)

    @classmethod
    def unit(cls, n: int) -> "Table":
        """The table over no variables holding the single empty mapping."""
        return cls(0, np.empty((1, 0), dtype=np.int64), n, canonical=True)

    def __len__(self):
        return self.rows.shape[0]

    def __repr__(self):
        return f"Table(mask={self.mask:#b}, size={len(self)})"

    @property
    def keys(self) -> np.ndarray:
        if self._keys is None:
            self._keys = encode(self.rows, self.n)
        return self._keys

    def positions(self, sub: int) -> list[int]:
        return [j for j, v in enumerate(self.cols) if sub >> v & 1]

    def proj_keys(self, sub: int) -> np.ndarray:
        """Keys of every row restricted to ``sub`` (one per row, not unique)."""
        sub &= self.mask
        if sub == self.mask:
            return self.keys
        got = self._proj.get(sub)
        if got is None:
            got = self._proj[sub] = encode(self.rows[:, self.positions(sub)], self.n)
        return got

    def proj_unique(self, sub: int) -> np.ndarray:
        """Sorted distinct keys of the projection onto ``sub``."""
        sub &= self.mask
        if sub == self.mask:
            return self.keys
        got = self._uniq.get(sub)
        if got is None:
            got = self._uniq[sub] = np.unique(self.proj_keys(sub))
        return got

    def sorted_by(self, sub: int):
        """(row order, keys in that order) sorting rows by their ``sub`` projection."""
        sub &= self.mask
        got = self._sorted.get(sub)
        if got is None:
            k = self.proj_keys(sub)
            order = np.argsort(k, kind="stable")
            got = self._sorted[sub] = (order, k[order])
        return got

    def project(self, sub: int) -> "Table":
        sub &= self.mask
        if sub == self.mask:
            return self
        got = self._sub.get(sub)
        if got is None:
            got = self._sub[sub] = Table(sub, self.rows[:, self.positions(sub)], self.n)
        return got

    def select(self, keep: np.ndarray) -> "Table":
        if keep.all():
            return self
        t = Table(self.mask, self.rows[keep], self.n, canonical=True)
        if self._keys is not None:
            t._keys = self._keys[keep]
        return t

    def contains(self, rows: np.ndarray, row_mask: int) -> np.ndarray:
        """Which ``rows`` (columns over ``row_mask``) agree with some row on the shared variables."""
        shared = self.mask & row_mask
        if shared == 0:
            return np.full(rows.shape[0], len(self) > 0)
        cols = bits(row_mask)
        pos = [j for j, v in enumerate(cols) if shared >> v & 1]
        probe = encode(rows[:, pos], self.n)
        hay = self.proj_unique(shared)
        at = np.searchsorted(hay, probe)
        hit = at < len(hay)
        hit[hit] = hay[at[hit]] == probe[hit]
        return hit

    def as_set(self) -> set[tuple]:
        return set(map(tuple, self.rows.tolist()))


def join_counts(a: Table, b: Table):
    """Per row of ``a``: start offset into b's sorted order and match count."""
    shared = a.mask & b.mask
    order, skeys = b.sorted_by(shared)
    probe = a.proj_keys(shared)
    lo = np.searchsorted(skeys, probe, side="left")
    hi = np.searchsorted(skeys, probe, side="right")
    return order, lo.astype(np.int64), (hi - lo).astype(np.int64)


def join_size(a: Table, b: Table) -> int:
    """Exact size of the natural join (rows of a join are distinct)."""
    return int(join_counts(a, b)[2].sum())


def _assemble(a: Table, b: Table, ai: np.ndarray, bi: np.ndarray) -> np.ndarray:
    mask = a.mask | b.mask
    out_cols = bits(mask)
    out = np.empty((len(ai), len(out_cols)), dtype=np.int64)
    apos = {v: j for j, v in enumerate(a.cols)}
    bpos = {v: j for j, v in enumerate(b.cols)}
    for j, v in enumerate(out_cols):
        if v in apos:
            out[:, j] = a.rows[ai, apos[v]]
        else:
            out[:, j] = b.rows[bi, bpos[v]]
    return out


class JoinStats:
    """Peak sizes seen by ``join_filter``: accepted prefix and candidate chunk."""

    __slots__ = ("peak_prefix", "peak_chunk", "joins")

    def __init__(self):
        self.peak_prefix = 0
        self.peak_chunk = 0
        self.joins = 0


def join_filter(a: Table, b: Table, accept=None, limit: int | None = None,
                stats: JoinStats | None = None) -> Table | None:
    """Join ``a`` and ``b``, keep rows passing ``accept``, give up past ``limit``.

    Candidates are produced in chunks of at most ``limit + 1`` rows and
    the accepted prefix never holds more than ``limit + 1`` rows. Returns
    None as soon as more than ``limit`` rows have been accepted.
    """
    mask = a.mask | b.mask
    n = a.n
    if stats is not None:
        stats.joins += 1
    order, lo, cnt = join_counts(a, b)
    total = int(cnt.sum())
    if total == 0:
        return Table.empty(mask, n)
    chunk = total if limit is None else max(limit + 1, 1)
    cum = np.cumsum(cnt)
    kept = []
    accepted = 0
    p = 0
    while p < total:
        q = min(total, p + chunk)
        # rows of a whose candidate ranges overlap [p, q)
        i0 = int(np.searchsorted(cum, p, side="right"))
        i1 = int(np.searchsorted(cum, q - 1, side="right"))
        left, right = kernels.expand_join(lo[i0:i1 + 1], cnt[i0:i1 + 1])
        skip = p - (int(cum[i0]) - int(cnt[i0]))
        left = left[skip:skip + (q - p)] + i0
        right = right[skip:skip + (q - p)]
        rows = _assemble(a, b, left, order[right])
        if stats is not None:
            stats.peak_chunk = max(stats.peak_chunk, len(rows))
        if accept is not None:
            rows = rows[accept(rows, mask)]
        if limit is not None and accepted + len(rows) > limit:
            # only the row that crosses the limit would be stored
            if stats is not None:
                stats.peak_prefix = max(stats.peak_prefix, limit + 1)
            return None
        accepted += len(rows)
        if stats is not None:
            stats.peak_prefix = max(stats.peak_prefix, accepted)
        kept.append(rows)
        p = q
    rows = np.concatenate(kept) if len(kept) > 1 else kept[0]
    return Table(mask, rows, n)
