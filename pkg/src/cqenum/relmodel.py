"""Relational structures over an interned domain.

Values from the outside world are interned to dense integer ids; every
relation is stored as a duplicate-free, lexicographically sorted
``int64`` array of shape ``(tuples, arity)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Mapping

import numpy as np

from .errors import ArityMismatch, BadPositions, IoError, UnknownRelation

MANIFEST_NAME = "manifest.txt"


@dataclass(frozen=True)
class Signature:
    symbols: tuple[tuple[str, int], ...]

    def __post_init__(self):
        seen = set()
        for name, arity in self.symbols:
            if name in seen:
                raise ValueError(f"duplicate relation symbol {name!r}")
            if arity < 1:
                raise ValueError(f"relation {name!r} must have arity >= 1, got {arity}")
            seen.add(name)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, int]]) -> "Signature":
        return cls(tuple((str(n), int(a)) for n, a in pairs))

    @classmethod
    def parse(cls, text: str) -> "Signature":
        """Parse manifest text: one ``Name/arity`` per line, ``#`` comments allowed."""
        pairs = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, sep, arity = line.rpartition("/")
            if not sep or not name or not arity.strip().isdigit():
                raise ValueError(f"manifest line {lineno}: expected 'Name/arity', got {raw!r}")
            pairs.append((name.strip(), int(arity)))
        return cls.from_pairs(pairs)

    def dumps(self) -> str:
        return "".join(f"{n}/{a}\n" for n, a in self.symbols)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.symbols)

    def arity(self, name: str) -> int:
        for n, a in self.symbols:
            if n == name:
                return a
        raise UnknownRelation(name)

    def __contains__(self, name) -> bool:
        return any(n == name for n, _ in self.symbols)

    @property
    def size(self) -> int:
        # |sigma| + sum of arities
        return len(self.symbols) + sum(a for _, a in self.symbols)


def _canonical_rows(rows: np.ndarray) -> np.ndarray:
    if rows.shape[0] <= 1:
        return rows
    return np.unique(rows, axis=0)


@dataclass(frozen=True, eq=False)
class Structure:
    """A finite relational instance.

    ``domain[i]`` is the external value of id ``i``. Relations hold ids only.
    """

    signature: Signature
    domain: tuple
    relations: Mapping[str, np.ndarray]
    _index: dict = field(default=None, repr=False)
    _tuple_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self._index is None:
            object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.domain)})
        n = len(self.domain)
        for name, arity in self.signature.symbols:
            rows = self.relations.get(name)
            if rows is None:
                raise UnknownRelation(f"no data for declared relation {name!r}")
            if rows.ndim != 2 or rows.shape[1] != arity:
                raise ArityMismatch(f"relation {name!r} has shape {rows.shape}, arity {arity}")
            if rows.size and (rows.min() < 0 or rows.max() >= n):
                raise ValueError(f"relation {name!r} references ids outside the domain")
        extra = set(self.relations) - set(self.signature.names)
        if extra:
            raise UnknownRelation(f"undeclared relations {sorted(extra)}")

    @classmethod
    def from_tuples(cls, data: Mapping[str, Iterable[tuple]], signature: Signature | None = None,
                    domain: Iterable[Hashable] = ()) -> "Structure":
        """Build a structure from external values, interning them in first-seen order."""
        dom: list = []
        index: dict = {}

        def intern(v):
            i = index.get(v)
            if i is None:
                i = index[v] = len(dom)
                dom.append(v)
            return i

        for v in domain:
            intern(v)
        rels = {}
        arities = {}
        if signature is not None:
            arities = dict(signature.symbols)
        for name, tuples in data.items():
            ids = [tuple(intern(v) for v in t) for t in tuples]
            if name in arities:
                arity = arities[name]
            elif ids:
                arity = len(ids[0])
            else:
                raise ArityMismatch(f"cannot infer arity of empty relation {name!r}")
            for t in ids:
                if len(t) != arity:
                    raise ArityMismatch(f"{name}: tuple of length {len(t)} for arity {arity}")
            arr = np.array(ids, dtype=np.int64).reshape(len(ids), arity)
            rels[name] = _canonical_rows(arr)
            arities[name] = arity
        if signature is None:
            signature = Signature.from_pairs((n, arities[n]) for n in rels)
        for name, arity in signature.symbols:
            rels.setdefault(name, np.empty((0, arity), dtype=np.int64))
        return cls(signature, tuple(dom), rels, index)

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray], domain: tuple, index: dict | None = None):
        """Wrap id arrays that share an existing domain (no re-interning)."""
        rels = {}
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=np.int64)
            rels[name] = _canonical_rows(arr)
        sig = Signature.from_pairs((n, a.shape[1]) for n, a in rels.items())
        return cls(sig, domain, rels, index)

    # -- accessors -----------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.domain)

    @property
    def m(self) -> int:
        return max((len(r) for r in self.relations.values()), default=0)

    @property
    def N(self) -> int:
        return (self.signature.size + self.n
                + sum(r.shape[0] * r.shape[1] for r in self.relations.values()))

    def id_of(self, value) -> int | None:
        return self._index.get(value)

    def value_of(self, i: int):
        return self.domain[i]

    def rows(self, name: str) -> np.ndarray:
        try:
            return self.relations[name]
        except KeyError:
            raise UnknownRelation(name) from None

    def tuples(self, name: str) -> frozenset:
        """The relation as a frozenset of id tuples (cached)."""
        got = self._tuple_cache.get(name)
        if got is None:
            got = frozenset(map(tuple, self.rows(name).tolist()))
            self._tuple_cache[name] = got
        return got

    def arity(self, name: str) -> int:
        return self.signature.arity(name)


def stats(structure: Structure) -> tuple[int, int, int]:
    return structure.n, structure.m, structure.N


# -- flat-file I/O -------------------------------------------------------------


def load_signature(path) -> Signature:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    return Signature.parse(text)


def load_structure(source, signature: Signature | str | os.PathLike | None = None,
                   delimiter: str = "\t") -> Structure:
    """Load one file per relation from ``source``; the file stem names the relation.

    ``signature`` is a Signature, a manifest path, or None to read
    ``manifest.txt`` inside ``source``.
    """
    source = Path(source)
    manifest_path = None
    if signature is None:
        manifest_path = source / MANIFEST_NAME
        signature = load_signature(manifest_path)
    elif not isinstance(signature, Signature):
        manifest_path = Path(signature)
        signature = load_signature(manifest_path)
    if not source.is_dir():
        raise IoError(f"data directory {source} does not exist")

    arities = dict(signature.symbols)
    files = {}
    for p in sorted(source.iterdir()):
        if not p.is_file() or p.name.startswith("."):
            continue
        if manifest_path is not None and p.resolve() == manifest_path.resolve():
            continue
        if p.stem not in arities:
            raise UnknownRelation(f"file {p.name} has no declaration in the manifest")
        if p.stem in files:
            raise IoError(f"two files for relation {p.stem}: {files[p.stem].name}, {p.name}")
        files[p.stem] = p
    missing = [n for n in signature.names if n not in files]
    if missing:
        raise IoError(f"no data file for declared relations {missing}")

    data = {}
    for name in signature.names:
        arity = arities[name]
        rows = []
        try:
            with open(files[name], encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.rstrip("\r\n")
                    if not line:
                        continue
                    fields = line.split(delimiter)
                    if len(fields) != arity:
                        raise ArityMismatch(
                            f"{files[name].name}:{lineno}: {len(fields)} fields for arity {arity}")
                    rows.append(tuple(fields))
        except OSError as exc:
            raise IoError(f"cannot read {files[name]}: {exc}") from exc
        data[name] = rows
    return Structure.from_tuples(data, signature)


def dump_structure(structure: Structure, target, delimiter: str = "\t", suffix: str = ".tsv"):
    """Write ``structure`` as a manifest plus one file per relation."""
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    (target / MANIFEST_NAME).write_text(structure.signature.dumps(), encoding="utf-8")
    for name in structure.signature.names:
        with open(target / f"{name}{suffix}", "w", encoding="utf-8") as fh:
            for row in structure.rows(name).tolist():
                fh.write(delimiter.join(str(structure.domain[i]) for i in row) + "\n")


# -- selection indexes ---------------------------------------------------------


@dataclass(frozen=True)
class SelectionIndex:
    """Buckets of a relation keyed by the values at ``key_positions``.

    Positions are 0-based. Lookup is one dict access; buckets are lists so
    walking one costs constant time per tuple.
    """

    relation: str
    key_positions: tuple[int, ...]
    buckets: Mapping[tuple, list]

    def lookup(self, key) -> list:
        return self.buckets.get(tuple(key), [])

    def __len__(self):
        return len(self.buckets)

    def items(self):
        return self.buckets.items()


def build_selection_index(structure: Structure, relation: str,
                          key_positions: Iterable[int]) -> SelectionIndex:
    arity = structure.arity(relation)
    pos = tuple(key_positions)
    if any(p < 0 or p >= arity for p in pos) or len(set(pos)) != len(pos):
        raise BadPositions(f"positions {pos} invalid for {relation}/{arity}")
    buckets: dict[tuple, list] = {}
    for t in map(tuple, structure.rows(relation).tolist()):
        buckets.setdefault(tuple(t[p] for p in pos), []).append(t)
    return SelectionIndex(relation, pos, buckets)
