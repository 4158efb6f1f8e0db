"""Bundled queries and instance generators used by tests, benchmarks and the CLI."""

from __future__ import annotations

import random

from .relmodel import Signature, Structure

CYCLE4 = "E12(x1,x2), E23(x2,x3), E34(x3,x4), E41(x4,x1)"
CYCLE4_QUANTIFIED = "exists x1 x3 . " + CYCLE4
TRIANGLE = "E(x,y), E(y,z), E(x,z)"


def cycle_instance(ell: int) -> Structure:
    """The 4-cycle instance where every relation mixes a star at ``a`` and a star at ``b``.

    E12 and E34 hold [ell] x {a} plus {b} x [ell]; E23 and E41 hold
    [ell] x {b} plus {a} x [ell]. Values are strings so the instance
    round-trips through flat files unchanged.
    """
    nums = [str(i) for i in range(1, ell + 1)]
    ab = [(i, "a") for i in nums] + [("b", i) for i in nums]
    ba = [(i, "b") for i in nums] + [("a", i) for i in nums]
    sig = Signature.from_pairs([("E12", 2), ("E23", 2), ("E34", 2), ("E41", 2)])
    return Structure.from_tuples({"E12": ab, "E23": ba, "E34": ab, "E41": ba}, sig,
                                 domain=nums + ["a", "b"])


def random_structure(rng: random.Random, relations: dict[str, int], n: int,
                     density: float | None = None, max_tuples: int | None = None) -> Structure:
    """Random relations over the domain ``0..n-1`` (values kept as ints)."""
    data = {}
    for name, arity in relations.items():
        space = n ** arity
        p = rng.uniform(0.1, 0.7) if density is None else density
        size = int(round(p * space))
        if max_tuples is not None:
            size = min(size, max_tuples)
        tuples = set()
        while len(tuples) < size:
            tuples.add(tuple(rng.randrange(n) for _ in range(arity)))
        data[name] = sorted(tuples)
    sig = Signature.from_pairs(relations.items())
    return Structure.from_tuples(data, sig, domain=range(n))


def random_query(rng: random.Random, max_vars: int = 5, max_atoms: int = 5,
                 relations: dict[str, int] | None = None, quantify: bool = True) -> str:
    """Query text over ``relations`` (default: binary R, S and ternary T)."""
    relations = relations or {"R": 2, "S": 2, "T": 3}
    k = rng.randint(1, max_vars)
    names = [f"v{i}" for i in range(k)]
    atoms = []
    used: list[str] = []
    for _ in range(rng.randint(1, max_atoms)):
        rel = rng.choice(sorted(relations))
        args = [rng.choice(names) for _ in range(relations[rel])]
        atoms.append(f"{rel}({','.join(args)})")
        used.extend(args)
    present = list(dict.fromkeys(used))
    quant = []
    if quantify and present:
        quant = [v for v in present if rng.random() < 0.35]
    body = ", ".join(atoms)
    return f"exists {' '.join(quant)} . {body}" if quant else body


def clique_instance(size: int = 3) -> Structure:
    """Complete loopless digraph on ``size`` vertices as relation E."""
    vs = [f"v{i}" for i in range(size)]
    edges = [(a, b) for a in vs for b in vs if a != b]
    return Structure.from_tuples({"E": edges}, Signature.from_pairs([("E", 2)]), domain=vs)


def empty_instance() -> Structure:
    sig = Signature.from_pairs([("E", 2)])
    return Structure.from_tuples({"E": []}, sig)


# name -> (query text, instance factory)
BUNDLED = {
    "cycle4": (CYCLE4, lambda: cycle_instance(4)),
    "cycle4-quantified": (CYCLE4_QUANTIFIED, lambda: cycle_instance(4)),
    "cycle4-l16": (CYCLE4, lambda: cycle_instance(16)),
    "triangle-clique3": (TRIANGLE, lambda: clique_instance(3)),
    "triangle-empty": (TRIANGLE, empty_instance),
    "path-projected": ("exists y . E(x,y), E(y,z)", lambda: clique_instance(4)),
}


def random_refinement(rng: random.Random, q, structure, max_family: int = 6, density: float = 0.6):
    """A refinement with a random subset-closed family and random tables.

    Tables are random subsets of all assignments (not derived from the
    query), so consistency repair has real work to do.
    """
    import itertools

    import numpy as np

    from .consistency import make_refinement

    k = q.k
    picks = [rng.randrange(1 << k) for _ in range(rng.randint(0, max_family))]
    family = {0}
    for p in picks:
        sub = p
        while True:
            family.add(sub)
            if sub == 0:
                break
            sub = (sub - 1) & p
    n = structure.n
    tables = {}
    for s in family:
        w = bin(s).count("1")
        space = list(itertools.product(range(n), repeat=w))
        rows = [t for t in space if rng.random() < density]
        if s == 0 and rng.random() < 0.9:
            rows = [()]
        tables[s] = np.array(rows, dtype=np.int64).reshape(len(rows), w)
    return make_refinement(q, structure, tables)
