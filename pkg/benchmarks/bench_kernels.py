"""Numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--size N] [--ell L]

Prints raw kernel timings and whole-preprocessing timings per backend.
The backend used by the library is chosen with CQENUM_BACKEND.
"""

import argparse

from cqenum.bench import closure_bench, kernel_bench


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--ell", type=int, default=2048)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'backend':8} {'expand_join':>12} {'horn chain':>12}")
    rows = kernel_bench(args.size, args.repeat)
    for r in rows:
        print(f"{r['backend']:8} {r['expand_join_s']:12.5f} {r['horn_chain_s']:12.5f}")
    base = {r["backend"]: r for r in rows}
    if "numba" in base and "numpy" in base:
        for key in ("expand_join_s", "horn_chain_s"):
            print(f"speedup {key[:-2]}: {base['numpy'][key] / base['numba'][key]:.1f}x")
    for r in closure_bench(args.ell):
        print(f"preprocess ell={r['ell']} {r['backend']:8} {r['preprocess_s']:.3f}s")


if __name__ == "__main__":
    main()
