"""MVET-style data model: types, views, entity records, splits and the file format.

A :class:`Dataset` is stored column-wise (one ``(N, d_j)`` array per view, an
``(N, n)`` availability mask and an ``(N, |T|)`` gold matrix) so the trainer
can slice batches without copying records around.  :class:`EntityRecord` is
the per-entity view of the same data.

File format (UTF-8, one item per line)::

    type <name>
    view <lang> <REPR> <dim>
    entity <id> <freq> types=<t1,t2,...> view:<lang>:<REPR>=<f1,f2,...> ...

Absent views are omitted from the record line.  Floats are written with 9
significant digits.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (ConfigInvalid, DimMismatch, EmptyDataset, EmptyStratumViolation,
                     ParseError, SpecMismatch, UnknownType)
from .numeric import make_rng


class Representation(str, enum.Enum):
    CTXT = "CTXT"
    NAME = "NAME"
    DESC = "DESC"

    @classmethod
    def parse(cls, text: str) -> "Representation":
        try:
            return cls(text.upper())
        except ValueError:
            raise ValueError(f"unknown representation {text!r}; expected ctxt, name or desc") from None


REPRESENTATIONS = (Representation.CTXT, Representation.NAME, Representation.DESC)


@dataclass(frozen=True)
class ViewSpec:
    language: str
    representation: Representation
    dim: int

    @property
    def key(self) -> tuple[str, Representation]:
        return (self.language, self.representation)

    @property
    def label(self) -> str:
        return f"{self.language}:{self.representation.value.lower()}"

    def __str__(self):
        return self.label


def parse_view_key(text: str) -> tuple[str, Representation]:
    """``"en:ctxt"`` -> ``("en", Representation.CTXT)``."""
    lang, sep, rep = text.strip().partition(":")
    if not sep or not lang:
        raise ValueError(f"view must look like <lang>:<repr>, got {text!r}")
    return lang, Representation.parse(rep)


class TypeVocab:
    def __init__(self, names):
        names = list(names)
        if len(set(names)) != len(names):
            raise ValueError("duplicate type names")
        for n in names:
            if not n or any(c.isspace() for c in n) or "," in n:
                raise ValueError(f"invalid type name {n!r}")
        self.names = names
        self._index = {n: i for i, n in enumerate(names)}

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        return isinstance(other, TypeVocab) and self.names == other.names

    def index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name):
        return name in self._index


@dataclass
class EntityRecord:
    id: str
    types: frozenset[int]
    views: dict[tuple[str, Representation], np.ndarray]
    mask: tuple[bool, ...]
    freq: int


class Bucket(enum.Enum):
    TAIL = "tail"
    MID = "mid"
    HEAD = "head"


def bucket(freq: int) -> Bucket:
    if freq < 0:
        raise ValueError("frequency must be non-negative")
    if freq < 10:
        return Bucket.TAIL
    if freq > 100:
        return Bucket.HEAD
    return Bucket.MID


class Dataset:
    """Immutable column-wise collection of entity records."""

    def __init__(self, vocab: TypeVocab, views, ids, Y, X, M, freq):
        self.vocab = vocab
        self.views = tuple(views)
        self.ids = list(ids)
        self.Y = np.asarray(Y, dtype=bool)
        self.X = [np.asarray(x, dtype=np.float64) for x in X]
        self.M = np.asarray(M, dtype=bool)
        self.freq = np.asarray(freq, dtype=np.int64)
        self._validate()
        for arr in (self.Y, self.M, self.freq, *self.X):
            arr.setflags(write=False)

    def _validate(self):
        N, n = len(self.ids), len(self.views)
        keys = [v.key for v in self.views]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (language, representation) view")
        if len(set(self.ids)) != N:
            raise ValueError("duplicate entity ids")
        if self.Y.shape != (N, len(self.vocab)) or self.M.shape != (N, n) or self.freq.shape != (N,):
            raise ValueError("column shapes disagree with entity count")
        if len(self.X) != n:
            raise ValueError("one array per declared view is required")
        for v, x in zip(self.views, self.X):
            if x.shape != (N, v.dim):
                raise DimMismatch(0, f"view {v} array has shape {x.shape}, expected {(N, v.dim)}")
        if N and not self.Y.any(axis=1).all():
            raise ValueError("every entity needs at least one gold type")
        if N and not self.M.any(axis=1).all():
            raise ValueError("every entity needs at least one available view")
        if np.any(self.freq < 0):
            raise ValueError("negative frequency")

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.vocab == other.vocab and self.views == other.views and self.ids == other.ids
                and np.array_equal(self.Y, other.Y) and np.array_equal(self.M, other.M)
                and np.array_equal(self.freq, other.freq)
                and all(np.array_equal(a, b) for a, b in zip(self.X, other.X)))

    def record(self, i: int) -> EntityRecord:
        return EntityRecord(
            id=self.ids[i],
            types=frozenset(np.flatnonzero(self.Y[i]).tolist()),
            views={v.key: self.X[j][i].copy() for j, v in enumerate(self.views) if self.M[i, j]},
            mask=tuple(bool(b) for b in self.M[i]),
            freq=int(self.freq[i]),
        )

    def records(self):
        for i in range(len(self)):
            yield self.record(i)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.vocab, self.views, [self.ids[i] for i in idx], self.Y[idx],
                       [x[idx] for x in self.X], self.M[idx], self.freq[idx])

    def view_index(self, key) -> int:
        if isinstance(key, ViewSpec):
            key = key.key
        elif isinstance(key, str):
            key = parse_view_key(key)
        for j, v in enumerate(self.views):
            if v.key == key:
                return j
        raise KeyError(key)

    def select_views(self, specs):
        """Arrays and mask aligned with ``specs`` (e.g. a model's views)."""
        cols = []
        for spec in specs:
            try:
                j = self.view_index(spec.key)
            except KeyError:
                raise SpecMismatch(f"dataset has no view {spec}") from None
            if self.views[j].dim != spec.dim:
                raise SpecMismatch(f"view {spec} has dim {self.views[j].dim} in the dataset, {spec.dim} expected")
            cols.append(j)
        return [self.X[j] for j in cols], self.M[:, cols]

    def availability_counts(self) -> dict[str, int]:
        return {v.label: int(self.M[:, j].sum()) for j, v in enumerate(self.views)}


def from_records(vocab: TypeVocab, views, records) -> Dataset:
    views = tuple(views)
    records = list(records)
    N = len(records)
    Y = np.zeros((N, len(vocab)), dtype=bool)
    M = np.zeros((N, len(views)), dtype=bool)
    X = [np.zeros((N, v.dim)) for v in views]
    for i, r in enumerate(records):
        Y[i, sorted(r.types)] = True
        for j, v in enumerate(views):
            vec = r.views.get(v.key)
            if vec is not None:
                if len(vec) != v.dim:
                    raise DimMismatch(0, f"entity {r.id}: view {v} has {len(vec)} values, expected {v.dim}")
                X[j][i] = vec
                M[i, j] = True
    return Dataset(vocab, views, [r.id for r in records], Y, X, M, [r.freq for r in records])


# ---------------------------------------------------------------- file format

def _fmt(x: float) -> str:
    return f"{x:.9g}"


def quantize(arr: np.ndarray) -> np.ndarray:
    """Round to the 9 significant digits the file format keeps."""
    flat = np.asarray(arr, dtype=np.float64).ravel()
    return np.array([float(_fmt(x)) for x in flat.tolist()]).reshape(np.shape(arr))


def write_dataset(ds: Dataset, path) -> None:
    lines = [f"type {t}" for t in ds.vocab.names]
    lines += [f"view {v.language} {v.representation.value} {v.dim}" for v in ds.views]
    X = [x.tolist() for x in ds.X]
    for i, eid in enumerate(ds.ids):
        parts = [f"entity {eid} {int(ds.freq[i])}",
                 "types=" + ",".join(ds.vocab.names[t] for t in np.flatnonzero(ds.Y[i]))]
        for j, v in enumerate(ds.views):
            if ds.M[i, j]:
                parts.append(f"view:{v.language}:{v.representation.value}="
                             + ",".join(_fmt(x) for x in X[j][i]))
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_dataset(path) -> Dataset:
    type_names, views, records = [], [], []
    vocab = None
    view_by_key: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            head, _, rest = line.partition(" ")
            if head == "type":
                if vocab is not None:
                    raise ParseError(lineno, "type declaration after the first entity")
                type_names.append(rest.strip())
            elif head == "view":
                if vocab is not None:
                    raise ParseError(lineno, "view declaration after the first entity")
                fields = rest.split()
                if len(fields) != 3:
                    raise ParseError(lineno, "expected: view <lang> <repr> <dim>")
                try:
                    spec = ViewSpec(fields[0], Representation.parse(fields[1]), int(fields[2]))
                except ValueError as e:
                    raise ParseError(lineno, str(e)) from None
                if spec.dim <= 0:
                    raise ParseError(lineno, "view dim must be positive")
                if spec.key in view_by_key:
                    raise ParseError(lineno, f"duplicate view {spec}")
                view_by_key[spec.key] = spec
                views.append(spec)
            elif head == "entity":
                if vocab is None:
                    try:
                        vocab = TypeVocab(type_names)
                    except ValueError as e:
                        raise ParseError(lineno, str(e)) from None
                records.append(_parse_record(lineno, rest, vocab, view_by_key))
            else:
                raise ParseError(lineno, f"unknown line kind {head!r}")
    if vocab is None:
        vocab = TypeVocab(type_names)
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ParseError(0, "duplicate entity id")
    return from_records(vocab, views, records)


def _parse_record(lineno, rest, vocab, view_by_key) -> EntityRecord:
    fields = rest.split()
    if len(fields) < 3:
        raise ParseError(lineno, "expected: entity <id> <freq> types=... [view:...]")
    eid = fields[0]
    try:
        freq = int(fields[1])
    except ValueError:
        raise ParseError(lineno, f"bad frequency {fields[1]!r}") from None
    if freq < 0:
        raise ParseError(lineno, "negative frequency")
    if not fields[2].startswith("types="):
        raise ParseError(lineno, "third field must be types=...")
    types = set()
    for name in filter(None, fields[2][len("types="):].split(",")):
        if name not in vocab:
            raise UnknownType(lineno, f"undeclared type {name!r}")
        types.add(vocab.index(name))
    if not types:
        raise ParseError(lineno, f"entity {eid} has no gold type")
    vecs = {}
    for f in fields[3:]:
        key, sep, values = f.partition("=")
        parts = key.split(":")
        if not sep or len(parts) != 3 or parts[0] != "view":
            raise ParseError(lineno, f"malformed view field {key!r}")
        try:
            vkey = (parts[1], Representation.parse(parts[2]))
        except ValueError as e:
            raise ParseError(lineno, str(e)) from None
        spec = view_by_key.get(vkey)
        if spec is None:
            raise ParseError(lineno, f"undeclared view {parts[1]}:{parts[2]}")
        if vkey in vecs:
            raise ParseError(lineno, f"view {spec} given twice")
        try:
            vec = np.array([float(x) for x in values.split(",")])
        except ValueError:
            raise ParseError(lineno, f"non-numeric value in view {spec}") from None
        if vec.size != spec.dim:
            raise DimMismatch(lineno, f"view {spec} has {vec.size} values, expected {spec.dim}")
        if not np.all(np.isfinite(vec)):
            raise ParseError(lineno, f"non-finite value in view {spec}")
        vecs[vkey] = vec
    if not vecs:
        raise ParseError(lineno, f"entity {eid} has no available view")
    mask = tuple(spec.key in vecs for spec in view_by_key.values())
    return EntityRecord(eid, frozenset(types), vecs, mask, freq)


# ------------------------------------------------------------------- splitting

@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.5
    dev: float = 0.2
    test: float = 0.3

    def __post_init__(self):
        fr = (self.train, self.dev, self.test)
        if min(fr) <= 0 or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be positive and sum to 1, got {fr}")

    @property
    def fractions(self):
        return (self.train, self.dev, self.test)


def stratified_split(Y, spec: SplitSpec = SplitSpec(), seed: int = 0):
    """Partition entity indices into (train, dev, test), stratified by type.

    ``Y`` is an ``(N, |T|)`` gold matrix or a :class:`Dataset`.  Types are
    visited from rarest to most frequent; each not-yet-assigned entity of the
    current type (shuffled by ``seed``) goes to the split whose count of that
    type is furthest below its target.  A multi-typed entity is therefore
    placed at its rarest type's turn.
    """
    if isinstance(Y, Dataset):
        Y = Y.Y
    Y = np.asarray(Y, dtype=bool)
    N = Y.shape[0]
    if N == 0:
        raise EmptyDataset("cannot split an empty dataset")
    fr = np.array(spec.fractions)
    rng = make_rng(seed)
    type_counts = Y.sum(axis=0)
    order = sorted((t for t in range(Y.shape[1]) if type_counts[t] > 0), key=lambda t: (type_counts[t], t))
    assign = np.full(N, -1, dtype=np.int64)
    for t in order:
        members = np.flatnonzero(Y[:, t])
        targets = fr * members.size
        have = np.array([np.sum(assign[members] == s) for s in range(3)], dtype=np.float64)
        todo = members[assign[members] < 0]
        for i in rng.permutation(todo):
            s = int(np.argmax(targets - have))
            assign[i] = s
            have[s] += 1
    untyped = np.flatnonzero(assign < 0)
    if untyped.size:
        raise ValueError(f"{untyped.size} entities carry no type")
    _repair(Y, assign, fr, rng)
    parts = tuple(np.flatnonzero(assign == s) for s in range(3))
    if any(p.size == 0 for p in parts):
        raise EmptyStratumViolation(f"cannot fill three non-empty splits from {N} entities")
    return parts


def _excess(counts, target):
    return (np.maximum(np.abs(counts - target) - 1.0, 0.0) ** 2).sum()


def _repair(Y, assign, fr, rng, max_iter=5000):
    """Swap entities between splits until every type is within one of target.

    The greedy pass is exact for single-typed entities but a multi-typed one
    also shifts its other types.  Each swap must lower the total squared
    excess, so the loop terminates; split sizes are unchanged.
    """
    Yi = Y.astype(np.int64)
    target = fr[:, None] * Yi.sum(axis=0)[None, :]
    counts = np.stack([Yi[assign == s].sum(axis=0) for s in range(3)]).astype(np.float64)
    cost = _excess(counts, target)
    for _ in range(max_iter):
        if cost == 0:
            return
        move = _best_swap(Yi, Y, assign, counts, target, cost, rng)
        if move is None:
            return
        a, b, i, j, cost = move
        assign[i], assign[j] = b, a
        counts[a] += Yi[j] - Yi[i]
        counts[b] += Yi[i] - Yi[j]


def _best_swap(Yi, Y, assign, counts, target, cost, rng):
    dev = counts - target
    cells = np.argwhere(np.abs(dev) > 1.0)
    cells = cells[np.argsort(-np.abs(dev[cells[:, 0], cells[:, 1]]), kind="stable")]
    for s, t in cells:
        # an over-full cell sends a t-carrier out; an under-full one pulls one in
        pairs = [(s, d) for d in range(3) if d != s] if dev[s, t] > 0 else [(d, s) for d in range(3) if d != s]
        best = (cost, None)
        for a, b in pairs:
            # i (carrying t) moves a -> b, j (any) moves b -> a
            cand_i = np.flatnonzero((assign == a) & Y[:, t])
            cand_j = np.flatnonzero(assign == b)
            if not cand_i.size or not cand_j.size:
                continue
            rest = cost - _excess(counts[[a, b]], target[[a, b]])
            for i in rng.permutation(cand_i)[:64]:
                diff = Yi[cand_j] - Yi[i]
                new = rest + (np.maximum(np.abs(counts[a] + diff - target[a]) - 1, 0) ** 2).sum(axis=1) \
                    + (np.maximum(np.abs(counts[b] - diff - target[b]) - 1, 0) ** 2).sum(axis=1)
                k = int(np.argmin(new))
                if new[k] < best[0] - 1e-12:
                    best = (new[k], (a, b, i, cand_j[k]))
        if best[1] is not None:
            return (*best[1], best[0])
    return None


def split_dataset(ds: Dataset, spec: SplitSpec = SplitSpec(), seed: int = 0):
    return tuple(ds.subset(p) for p in stratified_split(ds.Y, spec, seed))


# ------------------------------------------------------------------- generator

@dataclass(frozen=True)
class LanguageProfile:
    name: str
    availability: float
    noise: float
    representations: tuple[Representation, ...] = REPRESENTATIONS


@dataclass
class GenConfig:
    """Synthetic multiview typing data.

    Each entity draws 1..``max_types`` types; its latent signature is the sum
    of the per-type prototypes.  A view's vector is a fixed random projection
    of the signature plus Gaussian noise scaled by the language's noise (and
    the representation's ``repr_noise`` factor).
    """

    seed: int = 0
    n_entities: int = 5000
    n_types: int = 20
    languages: tuple[LanguageProfile, ...] = (
        LanguageProfile("en", 1.0, 2.0),
        LanguageProfile("de", 0.6, 2.2),
        LanguageProfile("es", 0.5, 2.4),
        LanguageProfile("fa", 0.3, 2.6),
    )
    dims: dict = field(default_factory=lambda: {Representation.CTXT: 32, Representation.NAME: 24,
                                                Representation.DESC: 28})
    repr_noise: dict = field(default_factory=dict)
    latent_dim: int = 16
    max_types: int = 3
    ambiguity: float = 0.1
    zipf: float = 1.5
    min_per_type: int = 0

    def validate(self):
        if self.n_entities < 1:
            raise ConfigInvalid("entities", "must be at least 1")
        if self.n_types < 1:
            raise ConfigInvalid("types", "must be at least 1")
        if not self.languages:
            raise ConfigInvalid("languages", "at least one language is required")
        names = [lp.name for lp in self.languages]
        if len(set(names)) != len(names):
            raise ConfigInvalid("languages", "duplicate language")
        for lp in self.languages:
            if not 0.0 <= lp.availability <= 1.0:
                raise ConfigInvalid("languages", f"availability of {lp.name} must lie in [0, 1]")
            if lp.noise < 0:
                raise ConfigInvalid("languages", f"noise of {lp.name} must be non-negative")
        if not 0.0 <= self.ambiguity <= 1.0:
            raise ConfigInvalid("ambiguity", "must lie in [0, 1]")
        for rep in {r for lp in self.languages for r in lp.representations}:
            if int(self.dims.get(rep, 0)) <= 0:
                raise ConfigInvalid("dims", f"{rep.value} dim must be positive")
        if self.latent_dim < 1:
            raise ConfigInvalid("latent_dim", "must be positive")
        if not 1 <= self.max_types <= self.n_types:
            raise ConfigInvalid("max_types", "must lie in [1, types]")
        if self.zipf <= 1.0:
            raise ConfigInvalid("zipf", "exponent must exceed 1")
        if self.min_per_type < 0 or self.min_per_type > self.n_entities:
            raise ConfigInvalid("min_per_type", "must lie in [0, entities]")

    @property
    def view_specs(self) -> tuple[ViewSpec, ...]:
        return tuple(ViewSpec(lp.name, r, int(self.dims[r]))
                     for r in REPRESENTATIONS for lp in self.languages if r in lp.representations)


def generate(cfg: GenConfig) -> Dataset:
    cfg.validate()
    rng = make_rng(cfg.seed)
    N, T, L = cfg.n_entities, cfg.n_types, cfg.latent_dim
    prototypes = rng.standard_normal((T, L))

    Y = np.zeros((N, T), dtype=bool)
    for i in range(N):
        k = int(rng.integers(1, cfg.max_types + 1))
        Y[i, rng.choice(T, size=k, replace=False)] = True
    for t in range(T):
        short = cfg.min_per_type - int(Y[:, t].sum())
        if short > 0:
            room = np.flatnonzero(~Y[:, t] & (Y.sum(axis=1) < cfg.max_types))
            if room.size < short:
                room = np.flatnonzero(~Y[:, t])
            Y[rng.choice(room, size=short, replace=False), t] = True
    signature = Y.astype(np.float64) @ prototypes

    views = cfg.view_specs
    by_lang = {lp.name: lp for lp in cfg.languages}
    X, M = [], np.zeros((N, len(views)), dtype=bool)
    for j, spec in enumerate(views):
        lp = by_lang[spec.language]
        proj = rng.standard_normal((spec.dim, L)) / math.sqrt(L)
        clean = signature @ proj.T
        if spec.representation is Representation.NAME and cfg.ambiguity > 0:
            swap = rng.random(N) < cfg.ambiguity
            donors = rng.integers(0, N, size=N)
            clean = np.where(swap[:, None], clean[donors], clean)
        scale = lp.noise * float(cfg.repr_noise.get(spec.representation, 1.0))
        X.append(clean + scale * rng.standard_normal((N, spec.dim)))
        M[:, j] = rng.random(N) < lp.availability
    # at least one view per entity: fall back to the most available view
    empty = ~M.any(axis=1)
    if empty.any():
        best = int(np.argmax([by_lang[v.language].availability for v in views]))
        M[empty, best] = True
    X = [quantize(np.where(M[:, [j]], x, 0.0)) for j, x in enumerate(X)]
    freq = np.minimum(rng.zipf(cfg.zipf, size=N), 10**9)
    width = len(str(N - 1))
    ids = [f"E{i:0{width}d}" for i in range(N)]
    vocab = TypeVocab([f"type{t:02d}" for t in range(T)])
    return Dataset(vocab, views, ids, Y, X, M, freq)
