"""Timing helpers shared by the CLI ``bench`` command and benchmarks/."""

from __future__ import annotations

import statistics
import time

import numpy as np

from . import kernels
from .cqparse import parse_cq
from .enumerate import StepCounter
from .fixtures import CYCLE4, cycle_instance
from .pipeline import preprocess


def _best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_bench(size: int = 200_000, repeat: int = 5, seed: int = 0) -> list[dict]:
    """Raw kernel timings for every backend on the same random inputs."""
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, 8, size=size).astype(np.int64)
    lo = rng.integers(0, size, size=size).astype(np.int64)
    # a chain-shaped deletion instance: node i feeds counter i, which kills node i+1
    n = min(size, 20_000)  # one propagation round per link in the numpy backend
    up_ptr = np.arange(n + 1, dtype=np.int64)
    up_data = np.arange(n, dtype=np.int64)
    counters = np.ones(n, dtype=np.int64)
    counter_node = np.minimum(np.arange(n, dtype=np.int64) + 1, n - 1)
    down_ptr = np.zeros(n + 1, dtype=np.int64)
    down_data = np.zeros(0, dtype=np.int64)
    dead0 = np.zeros(n, dtype=np.bool_)
    dead0[0] = True
    out = []
    previous = kernels.backend
    try:
        for name in kernels.BACKENDS:
            got = kernels.use_backend(name)
            # warm-up triggers compilation or loads the cache
            kernels.expand_join(lo[:10], counts[:10])
            kernels.horn_propagate(dead0[:10], up_ptr[:11], up_data[:10], counters[:10],
                                   np.minimum(counter_node[:10], 9), down_ptr[:11], down_data)
            tj = _best_of(lambda: kernels.expand_join(lo, counts), repeat)
            th = _best_of(lambda: kernels.horn_propagate(dead0, up_ptr, up_data, counters,
                                                         counter_node, down_ptr, down_data),
                          max(1, repeat // 2))
            out.append({"backend": got, "expand_join_s": tj, "horn_chain_s": th})
    finally:
        kernels.use_backend(previous)
    return out


def closure_bench(ell: int = 2048, w: float = 1.0, delta: float = 0.1) -> list[dict]:
    """Whole preprocessing on the cycle instance under every backend."""
    q = parse_cq(CYCLE4)
    A = cycle_instance(ell)
    out = []
    previous = kernels.backend
    try:
        for name in kernels.BACKENDS:
            got = kernels.use_backend(name)
            preprocess(q, cycle_instance(8), w, delta)  # warm-up
            t = time.perf_counter()
            preprocess(q, A, w, delta)
            out.append({"backend": got, "ell": ell, "preprocess_s": time.perf_counter() - t})
    finally:
        kernels.use_backend(previous)
    return out


def delay_profile(stream, counter: StepCounter, limit: int | None = None):
    """Consume ``stream``; per-emission step and wall-clock gaps."""
    steps, walls = [], []
    last_s = counter.steps
    last_t = time.perf_counter()
    n = 0
    for _ in stream:
        now = time.perf_counter()
        steps.append(counter.steps - last_s)
        walls.append(now - last_t)
        last_s, last_t = counter.steps, now
        n += 1
        if limit is not None and n >= limit:
            break
    return steps, walls


def summarize(steps, walls) -> dict:
    if not steps:
        return {"count": 0, "max_steps": 0, "median_steps": 0, "max_wall": 0.0, "median_wall": 0.0}
    return {"count": len(steps), "max_steps": max(steps), "median_steps": statistics.median(steps),
            "max_wall": max(walls), "median_wall": statistics.median(walls)}


def delay_bench(ells=(256, 2048), w: float = 1.0, delta: float = 0.1, prefix: int = 100_000):
    q = parse_cq(CYCLE4)
    rows = []
    for ell in ells:
        A = cycle_instance(ell)
        t = time.perf_counter()
        qi = preprocess(q, A, w, delta)
        tp = time.perf_counter() - t
        c = StepCounter()
        steps, walls = delay_profile(qi.enumerate(c), c, prefix)
        rows.append({"ell": ell, "preprocess_s": tp, "refinements": len(qi.instances),
                     **summarize(steps, walls)})
    return rows
