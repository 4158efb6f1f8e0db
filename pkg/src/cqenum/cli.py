"""Command line: run, analyze, test, oracle, bench and fixture.

Exit codes: 0 success, 1 parse or I/O error, 2 width exceeded,
3 too many variables, 4 a batch test disagreed with the oracle.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from pathlib import Path

from . import bench
from .cqparse import CQ, parse_cq
from .decomp import enumerate_fc_tds
from .enumerate import StepCounter
from .errors import CQEnumError, TooManyVariables, WidthExceeded
from .fixtures import BUNDLED, CYCLE4, CYCLE4_QUANTIFIED, cycle_instance
from .oracle import brute_eval
from .pipeline import preprocess
from .relmodel import Structure, dump_structure, load_structure

log = logging.getLogger("cqenum")

DATA_ENV = "CQENUM_DATA"
EOE = "EOE"

EXIT_OK, EXIT_INPUT, EXIT_WIDTH, EXIT_VARS, EXIT_DISAGREE = 0, 1, 2, 3, 4


def _read_query(args) -> CQ:
    if args.expr is not None:
        return parse_cq(args.expr)
    if args.query is None:
        raise CQEnumError("give a query file or --expr")
    try:
        text = Path(args.query).read_text(encoding="utf-8")
    except OSError as exc:
        raise CQEnumError(f"cannot read query file {args.query}: {exc}") from exc
    return parse_cq(text)


def _read_data(args) -> Structure:
    root = args.data or os.environ.get(DATA_ENV)
    if not root:
        raise CQEnumError(f"no data directory given and {DATA_ENV} is unset")
    return load_structure(root, args.manifest, delimiter=args.delimiter)


def _fmt(A: Structure, row, sep="\t") -> str:
    return sep.join(str(A.domain[i]) for i in row)


def _parse_tuple(A: Structure, text: str, arity: int):
    """Ids for a tab- or comma-separated tuple; None if a value is not in the domain."""
    text = text.strip()
    fields = [] if not text else (text.split("\t") if "\t" in text else text.split(","))
    fields = [f.strip() for f in fields]
    if len(fields) != arity:
        raise CQEnumError(f"tuple has {len(fields)} fields, expected {arity}")
    ids = [A.id_of(f) for f in fields]
    return None if any(i is None for i in ids) else tuple(ids)


def cmd_run(args, out=sys.stdout, err=sys.stderr) -> int:
    q = _read_query(args)
    A = _read_data(args)
    qi = preprocess(q, A, args.w, args.delta)
    counter = StepCounter()
    stream = qi.enumerate(counter, drain=args.drain)
    limit = args.limit
    if args.stable:
        rows = []
        for i, t in enumerate(stream):
            if limit is not None and i >= limit:
                break
            rows.append(_fmt(A, t))
        for line in sorted(rows):
            out.write(line + "\n")
        steps = walls = None
    elif args.profile_delay:
        steps, walls = bench.delay_profile(_emit(stream, A, out, limit), counter)
    else:
        steps = walls = None
        for _ in _emit(stream, A, out, limit):
            pass
    if args.sentinel:
        out.write(EOE + "\n")
    out.flush()
    if args.profile_delay and steps is not None:
        rep = bench.summarize(steps, walls)
        err.write("delay " + " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                                      for k, v in rep.items()) + "\n")
    return EXIT_OK


def _emit(stream, A, out, limit=None):
    if limit == 0:
        return
    for i, t in enumerate(stream, 1):
        out.write(_fmt(A, t) + "\n")
        yield t
        if limit is not None and i >= limit:
            return


def cmd_analyze(args, out=sys.stdout, err=sys.stderr) -> int:
    q = _read_query(args)
    out.write(f"variables: {' '.join(q.variables)}\n")
    out.write(f"free: {' '.join(q.free) or '-'}\n")
    out.write(f"quantified: {' '.join(q.quantified) or '-'}\n")
    tds = enumerate_fc_tds(q)
    out.write(f"free-connex decompositions: {len(tds)}\n")
    full = frozenset(q.variables)
    widest = max(max(len(b) for b in td.bags) for td in tds)
    all_full = all(any(b == full for b in td.bags) for td in tds)
    out.write(f"largest bag: {widest} variables; every decomposition has a bag with all "
              f"variables: {'yes' if all_full else 'no'}\n")
    for i, td in enumerate(tds):
        out.write(f"  td {i}: " + " | ".join(",".join(sorted(b)) for b in td.bags) + "\n")
    if args.data is None and not os.environ.get(DATA_ENV):
        return EXIT_OK
    A = _read_data(args)
    try:
        qi = preprocess(q, A, args.w, args.delta, tds=tds)
    except WidthExceeded as exc:
        out.write(f"width exceeded: refinement {exc.refinement_index}, best cost {exc.best_cost:.6g}\n")
        raise
    p = qi.params
    out.write(f"n={A.n} m={A.m} c={p.c:.6g} eps={p.eps:.6g} M={qi.M}\n")
    out.write(f"refinements: {len(qi.instances)}\n")
    for i, inst in enumerate(qi.instances):
        sizes = ", ".join(f"{{{','.join(k)}}}={v}" for k, v in sorted(inst.refinement.sizes().items()))
        bags = " | ".join(f"{','.join(sorted(b))}:{n}" for b, n in inst.bag_sizes().items())
        out.write(f"  refinement {i}: tables {sizes}\n")
        out.write(f"    selected td (max bag cost {inst.cost:.6g}): {bags}\n")
    return EXIT_OK


def cmd_test(args, out=sys.stdout, err=sys.stderr) -> int:
    q = _read_query(args)
    A = _read_data(args)
    qi = preprocess(q, A, args.w, args.delta)
    k = len(q.free)
    if args.tuple is not None:
        ids = _parse_tuple(A, args.tuple, k)
        out.write(("true" if ids is not None and qi.test(ids) else "false") + "\n")
        return EXIT_OK
    # batch mode: answers from the oracle plus random candidates, cross-checked
    truth = brute_eval(q, A)
    rng = random.Random(args.seed)
    cands = list(truth.rows)
    rng.shuffle(cands)
    cands = cands[: args.samples]
    for _ in range(args.samples):
        cands.append(tuple(rng.randrange(A.n) for _ in range(k)) if A.n else ())
    bad = 0
    for t in cands:
        got = qi.test(t)
        if got != (t in truth.rows):
            bad += 1
            err.write(f"disagreement on {_fmt(A, t)}: index says {got}\n")
    out.write(f"tested {len(cands)} tuples, {bad} disagreements\n")
    return EXIT_OK if bad == 0 else EXIT_DISAGREE


def cmd_oracle(args, out=sys.stdout, err=sys.stderr) -> int:
    q = _read_query(args)
    A = _read_data(args)
    for t in sorted(_fmt(A, r) for r in brute_eval(q, A).rows):
        out.write(t + "\n")
    if args.sentinel:
        out.write(EOE + "\n")
    return EXIT_OK


def cmd_bench(args, out=sys.stdout, err=sys.stderr) -> int:
    report = {"kernels": bench.kernel_bench(args.size, seed=args.seed),
              "delay": bench.delay_bench(args.ells, args.w, args.delta, args.prefix)}
    out.write(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def cmd_fixture(args, out=sys.stdout, err=sys.stderr) -> int:
    target = Path(args.target)
    if args.name == "cycle":
        A = cycle_instance(args.ell)
        text = CYCLE4_QUANTIFIED if args.quantified else CYCLE4
    else:
        text, make = BUNDLED[args.name]
        A = make()
    dump_structure(A, target / "data")
    (target / "query.cq").write_text(text + "\n", encoding="utf-8")
    out.write(f"wrote {target}\n")
    return EXIT_OK


def _common(p, data=True):
    p.add_argument("query", nargs="?", help="file holding the query text")
    p.add_argument("-e", "--expr", help="query text given inline")
    if data:
        p.add_argument("-d", "--data", help=f"data directory (default ${DATA_ENV})")
        p.add_argument("--manifest", help="manifest path (default: manifest.txt in the data directory)")
        p.add_argument("--delimiter", default="\t", help="field delimiter of the data files")


def _engine(p):
    p.add_argument("--w", type=float, default=2.0, help="width bound the pipeline may use")
    p.add_argument("--delta", type=float, default=0.5, help="slack above w for table sizes")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cqenum", description="Conjunctive query enumeration engine")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="enumerate the answers")
    _common(p)
    _engine(p)
    p.add_argument("--limit", type=int, default=None, help="stop after this many answers")
    p.add_argument("--sentinel", action="store_true", help=f"print {EOE} after the last answer")
    p.add_argument("--stable", action="store_true", help="sort the output (buffers everything)")
    p.add_argument("--profile-delay", action="store_true", help="report delays on stderr")
    p.add_argument("--drain", choices=("cursor", "buffer", "filter"), default="cursor")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="decompositions, refinements and selected bags")
    _common(p)
    _engine(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("test", help="membership test, or a batch cross-check against the oracle")
    _common(p)
    _engine(p)
    p.add_argument("--tuple", help="values separated by tabs or commas, in free-variable order")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("oracle", help="answers by brute force, sorted")
    _common(p)
    p.add_argument("--sentinel", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="kernel timings per backend and delay profile")
    _engine(p)
    p.set_defaults(w=1.0, delta=0.1)
    p.add_argument("--ells", type=int, nargs="+", default=[256, 2048])
    p.add_argument("--prefix", type=int, default=100_000)
    p.add_argument("--size", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fixture", help="write TARGET/query.cq and the instance under TARGET/data")
    p.add_argument("name", choices=["cycle", *BUNDLED])
    p.add_argument("target")
    p.add_argument("--ell", type=int, default=4)
    p.add_argument("--quantified", action="store_true")
    p.set_defaults(func=cmd_fixture)
    return ap


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "w", 1) < 1 or getattr(args, "delta", 1) <= 0:
        err.write("error: need w >= 1 and delta > 0\n")
        return EXIT_INPUT
    if getattr(args, "limit", None) is not None and args.limit < 0:
        err.write("error: --limit must be non-negative\n")
        return EXIT_INPUT
    try:
        return args.func(args, out, err)
    except WidthExceeded as exc:
        err.write(f"error: {exc}\n")
        return EXIT_WIDTH
    except TooManyVariables as exc:
        err.write(f"error: {exc}\n")
        return EXIT_VARS
    except (CQEnumError, OSError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
