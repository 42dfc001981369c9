"""Representation views: CTXT (entity skip-gram), NAME (title words), DESC (tf-idf keywords).

CTXT vectors come from skip-gram with negative sampling over a corpus in which
entity mentions are the reserved tokens ``@ENT:<id>``.  NAME averages the
word vectors of the title with parenthesised parts removed.  DESC averages the
vectors of the top-k tf-idf keywords of the description, with

    score(w) = tf(w) * (ln((1 + N) / (1 + df(w))) + 1)

and ties broken by token order.  Words missing from the embeddings get a
deterministic unit vector seeded by a 64-bit BLAKE2b hash of the token
(``oov="hash"``) or zeros (``oov="zero"``).
"""
from __future__ import annotations

import hashlib
import logging
import math
import re
import string
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, Representation, TypeVocab, ViewSpec
from .errors import (DimMismatch, DuplicateToken, EmptyCorpus, EmptyDescription, EmptyName,
                     ParseError, SourceMissing)
from .numeric import log_sigmoid, make_rng, sigmoid_v

log = logging.getLogger(__name__)

ENTITY_PREFIX = "@ENT:"
_PUNCT = string.punctuation + "“”‘’«»…–—"


def entity_token(entity_id: str) -> str:
    return ENTITY_PREFIX + entity_id


def tokenize(text: str) -> list[str]:
    out = []
    for raw in text.split():
        tok = raw.strip(_PUNCT).lower()
        if tok:
            out.append(tok)
    return out


# ------------------------------------------------------------------ embeddings

class WordEmbeddings:
    """Token -> vector table backed by one matrix."""

    def __init__(self, tokens, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        tokens = list(tokens)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise ValueError("need one matrix row per token")
        self.tokens = tokens
        self.matrix = matrix
        self.index = {}
        for i, t in enumerate(tokens):
            if t in self.index:
                raise DuplicateToken(i + 1, f"duplicate token {t!r}")
            self.index[t] = i

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __getitem__(self, token) -> np.ndarray:
        return self.matrix[self.index[token]]

    def get(self, token, default=None):
        i = self.index.get(token)
        return default if i is None else self.matrix[i]


def load_embeddings(path) -> WordEmbeddings:
    """word2vec text format: ``<count> <dim>`` header, then ``<token> <floats>`` rows."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParseError(1, "header must be '<count> <dim>'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise ParseError(1, "header must hold two integers") from None
        if count < 0 or dim <= 0:
            raise ParseError(1, "count must be >= 0 and dim > 0")
        tokens, rows, seen = [], [], set()
        for lineno, line in enumerate(fh, start=2):
            fields = line.rstrip("\n").rstrip(" ").split(" ")
            if fields == [""]:
                continue
            tok = fields[0]
            if tok in seen:
                raise DuplicateToken(lineno, f"duplicate token {tok!r}")
            if len(fields) - 1 != dim:
                raise DimMismatch(lineno, f"token {tok!r} has {len(fields) - 1} values, expected {dim}")
            try:
                rows.append([float(x) for x in fields[1:]])
            except ValueError:
                raise ParseError(lineno, f"non-numeric value for token {tok!r}") from None
            seen.add(tok)
            tokens.append(tok)
    if len(tokens) != count:
        raise ParseError(0, f"header declares {count} rows, found {len(tokens)}")
    return WordEmbeddings(tokens, np.array(rows).reshape(len(tokens), dim))


def save_embeddings(emb: WordEmbeddings, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(emb)} {emb.dim}\n")
        for tok, row in zip(emb.tokens, emb.matrix.tolist()):
            fh.write(tok + " " + " ".join(f"{x:.9g}" for x in row) + "\n")


def oov_vector(token: str, dim: int, rule: str = "hash") -> np.ndarray:
    if rule == "zero":
        return np.zeros(dim)
    if rule != "hash":
        raise ValueError(f"unknown OOV rule {rule!r}")
    seed = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
    v = make_rng(seed).standard_normal(dim)
    return v / np.linalg.norm(v)


def word_vector(emb: WordEmbeddings, token: str, oov: str = "hash") -> np.ndarray:
    v = emb.get(token)
    return oov_vector(token, emb.dim, oov) if v is None else v


# ------------------------------------------------------------------------ NAME

_PARENS = re.compile(r"\([^()]*\)")


def strip_parenthetical(title: str) -> str:
    prev = None
    while prev != title:
        prev, title = title, _PARENS.sub(" ", title)
    out = " ".join(title.split())
    if not out:
        raise EmptyName("title is empty once parenthesised parts are removed")
    return out


def name_embedding(title: str, emb: WordEmbeddings, oov: str = "hash", reduce: str = "mean") -> np.ndarray:
    words = tokenize(strip_parenthetical(title))
    if not words:
        raise EmptyName(f"no words left in title {title!r}")
    vecs = np.array([word_vector(emb, w, oov) for w in words])
    return vecs.sum(axis=0) if reduce == "sum" else vecs.mean(axis=0)


# ------------------------------------------------------------------------ DESC

@dataclass
class DocFreq:
    df: Counter
    n_docs: int


def document_frequencies(docs) -> DocFreq:
    df: Counter = Counter()
    n = 0
    for doc in docs:
        toks = tokenize(doc) if isinstance(doc, str) else doc
        df.update(set(toks))
        n += 1
    return DocFreq(df, n)


def tfidf_scores(tokens, stats: DocFreq) -> dict[str, float]:
    tf = Counter(tokens)
    return {w: c * (math.log((1 + stats.n_docs) / (1 + stats.df.get(w, 0))) + 1.0) for w, c in tf.items()}


def keywords(tokens, stats: DocFreq, k: int = 20) -> list[str]:
    if k < 1:
        raise ValueError("k must be at least 1")
    scores = tfidf_scores(tokens, stats)
    return [w for w, _ in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]]


def desc_embedding(paragraph, stats: DocFreq, emb: WordEmbeddings, k: int = 20, oov: str = "hash") -> np.ndarray:
    tokens = tokenize(paragraph) if isinstance(paragraph, str) else list(paragraph)
    if not tokens:
        raise EmptyDescription("description has no tokens")
    kws = keywords(tokens, stats, k)
    return np.mean([word_vector(emb, w, oov) for w in kws], axis=0)


# ------------------------------------------------------------------------ CTXT

@dataclass
class EntityCorpus:
    sentences: list[list[str]]

    def entity_counts(self) -> Counter:
        return Counter(t[len(ENTITY_PREFIX):] for s in self.sentences for t in s if t.startswith(ENTITY_PREFIX))


def read_corpus(path) -> EntityCorpus:
    with open(path, encoding="utf-8") as fh:
        return EntityCorpus([line.split() for line in fh if line.strip()])


@dataclass
class SgnsConfig:
    dim: int = 200
    window: int = 5
    negatives: int = 5
    lr: float = 0.025
    epochs: int = 5
    subsample: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if min(self.dim, self.window, self.negatives, self.epochs) < 1:
            raise ValueError("dim, window, negatives and epochs must be positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


def vocab_counts(corpus: EntityCorpus) -> Counter:
    return Counter(t for s in corpus.sentences for t in s)


def sgns_step(v, u_pos, u_negs, lr: float) -> float:
    """One ascent step on ln σ(u_pos·v) + Σ ln σ(-u_neg·v); arrays are updated in place.

    ``u_pos`` may be a matrix of several context rows sharing the centre ``v``;
    ``u_negs`` then holds one block of negatives per context row.  Returns the
    negative objective summed over the pairs before the update.
    """
    if u_pos.ndim == 1:
        u_pos = u_pos[None, :]
    if u_negs.ndim == 2:
        u_negs = u_negs[None, :, :]
    if u_negs.ndim == 1:
        u_negs = u_negs[None, None, :]
    sp = u_pos @ v
    sn = u_negs @ v
    loss = -float(log_sigmoid(sp).sum() + log_sigmoid(-sn).sum())
    gp = 1.0 - sigmoid_v(sp)
    gn = -sigmoid_v(sn)
    dv = gp @ u_pos + np.einsum("ck,ckd->d", gn, u_negs)
    u_pos += lr * gp[:, None] * v
    u_negs += lr * gn[:, :, None] * v
    v += lr * dv
    return loss


def train_ctxt(corpus: EntityCorpus, cfg: SgnsConfig = SgnsConfig(), history: list | None = None) -> WordEmbeddings:
    """Skip-gram with negative sampling; single-threaded and deterministic given ``cfg.seed``.

    Entity tokens are trained like any other token.  When ``history`` is a
    list, the mean negative objective per pair of each epoch is appended.
    """
    counts = vocab_counts(corpus)
    if not counts:
        raise EmptyCorpus("corpus has no tokens")
    vocab = sorted(counts, key=lambda t: (-counts[t], t))
    index = {t: i for i, t in enumerate(vocab)}
    freq = np.array([counts[t] for t in vocab], dtype=np.float64)
    total = freq.sum()
    noise = freq ** 0.75
    noise /= noise.sum()
    if cfg.subsample > 0:
        f = freq / total
        keep = np.minimum(1.0, (np.sqrt(f / cfg.subsample) + 1.0) * cfg.subsample / f)
    else:
        keep = np.ones(len(vocab))

    rng = make_rng(cfg.seed)
    V, D = len(vocab), cfg.dim
    syn0 = (rng.random((V, D)) - 0.5) / D
    syn1 = np.zeros((V, D))
    sents = [np.array([index[t] for t in s], dtype=np.int64) for s in corpus.sentences if s]
    steps_total = max(1, cfg.epochs * int(total))
    step = 0
    for _ in range(cfg.epochs):
        loss_sum, pairs = 0.0, 0
        for sent in sents:
            sent = sent[rng.random(sent.size) < keep[sent]]
            for pos, w in enumerate(sent.tolist()):
                lr = cfg.lr * max(1e-4, 1.0 - step / steps_total)
                step += 1
                b = int(rng.integers(1, cfg.window + 1))
                ctx = np.concatenate([sent[max(0, pos - b):pos], sent[pos + 1:pos + 1 + b]])
                if ctx.size == 0:
                    continue
                negs = rng.choice(V, size=(ctx.size, cfg.negatives), p=noise)
                v = syn0[w].copy()
                pos0, neg0 = syn1[ctx], syn1[negs]
                u_pos, u_neg = pos0.copy(), neg0.copy()
                loss_sum += sgns_step(v, u_pos, u_neg, lr)
                pairs += ctx.size
                syn0[w] = v
                # scatter back; repeated rows accumulate their updates
                np.add.at(syn1, ctx, u_pos - pos0)
                np.add.at(syn1, negs.ravel(), (u_neg - neg0).reshape(-1, D))
        if history is not None:
            history.append(loss_sum / max(pairs, 1))
    return WordEmbeddings(vocab, syn0)


# ------------------------------------------------------------------ assembling

@dataclass
class LanguageSources:
    """Raw material for one language; any field may be absent."""

    corpus: EntityCorpus | None = None
    ctxt: WordEmbeddings | None = None  # already-trained entity vectors, used instead of corpus
    titles: dict[str, str] | None = None
    descriptions: dict[str, str] | None = None
    words: WordEmbeddings | None = None


@dataclass
class Skeleton:
    vocab: TypeVocab
    ids: list[str]
    types: list[frozenset[int]]
    freq: list[int] | None = None


def read_tsv_map(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            key, sep, text = line.partition("\t")
            if not sep:
                raise ParseError(lineno, "expected <entity_id><TAB><text>")
            out[key] = text
    return out


def read_skeleton(path) -> Skeleton:
    """``entity_id<TAB>type1,type2[<TAB>freq]`` per line."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) not in (2, 3):
                raise ParseError(lineno, "expected <entity_id><TAB><types>[<TAB><freq>]")
            names = [t for t in cols[1].split(",") if t]
            if not names:
                raise ParseError(lineno, "entity has no type")
            freq = None
            if len(cols) == 3:
                try:
                    freq = int(cols[2])
                except ValueError:
                    raise ParseError(lineno, f"bad frequency {cols[2]!r}") from None
            rows.append((cols[0], names, freq))
    vocab = TypeVocab(sorted({n for _, names, _ in rows for n in names}))
    has_freq = [f is not None for _, _, f in rows]
    if any(has_freq) and not all(has_freq):
        raise ParseError(0, "frequency column must be given for all entities or none")
    return Skeleton(vocab, [r[0] for r in rows],
                    [frozenset(vocab.index(n) for n in names) for _, names, _ in rows],
                    [r[2] for r in rows] if all(has_freq) and rows else None)


def assemble_views(skeleton: Skeleton, view_keys, sources: dict[str, LanguageSources],
                   sgns: SgnsConfig = SgnsConfig(), k: int = 20, oov: str = "hash",
                   name_reduce: str = "mean") -> Dataset:
    """Fill every declared (language, representation) view from its sources.

    Mask bits record real availability: no mention in the corpus means no
    CTXT view, no title means no NAME view, no description means no DESC
    view.  Entities left without any view are dropped.
    """
    view_keys = list(view_keys)
    trained: dict[str, WordEmbeddings] = {}
    specs = []
    for lang, rep in view_keys:
        src = sources.get(lang)
        if src is None:
            raise SourceMissing(f"no sources for language {lang!r}")
        if rep is Representation.CTXT:
            if src.ctxt is None and src.corpus is None:
                raise SourceMissing(f"{lang}:ctxt needs a corpus or entity vectors")
            if lang not in trained:
                trained[lang] = src.ctxt if src.ctxt is not None else train_ctxt(src.corpus, sgns)
            specs.append(ViewSpec(lang, rep, trained[lang].dim))
        else:
            text = src.titles if rep is Representation.NAME else src.descriptions
            if text is None:
                raise SourceMissing(f"{lang}:{rep.value.lower()} needs a text file")
            if src.words is None:
                raise SourceMissing(f"{lang}:{rep.value.lower()} needs word embeddings")
            specs.append(ViewSpec(lang, rep, src.words.dim))

    doc_stats = {}
    for lang, rep in view_keys:
        if rep is Representation.DESC and lang not in doc_stats:
            doc_stats[lang] = document_frequencies(sources[lang].descriptions.values())

    N = len(skeleton.ids)
    X = [np.zeros((N, s.dim)) for s in specs]
    M = np.zeros((N, len(specs)), dtype=bool)
    for j, spec in enumerate(specs):
        src = sources[spec.language]
        for i, eid in enumerate(skeleton.ids):
            vec = None
            if spec.representation is Representation.CTXT:
                vec = trained[spec.language].get(entity_token(eid))
            elif spec.representation is Representation.NAME:
                title = src.titles.get(eid)
                if title is not None:
                    try:
                        vec = name_embedding(title, src.words, oov, name_reduce)
                    except EmptyName:
                        vec = None
            else:
                para = src.descriptions.get(eid)
                if para is not None:
                    try:
                        vec = desc_embedding(para, doc_stats[spec.language], src.words, k, oov)
                    except EmptyDescription:
                        vec = None
            if vec is not None:
                X[j][i] = vec
                M[i, j] = True

    if skeleton.freq is not None:
        freq = np.array(skeleton.freq, dtype=np.int64)
    else:
        # mentions summed over the CTXT corpora, so the view order does not matter
        counts = Counter()
        for lang in dict.fromkeys(l for l, r in view_keys if r is Representation.CTXT):
            if sources[lang].corpus is not None:
                counts += sources[lang].corpus.entity_counts()
        freq = np.array([counts.get(eid, 0) for eid in skeleton.ids], dtype=np.int64)

    Y = np.zeros((N, len(skeleton.vocab)), dtype=bool)
    for i, ts in enumerate(skeleton.types):
        Y[i, sorted(ts)] = True
    keep = np.flatnonzero(M.any(axis=1))
    if keep.size < N:
        log.warning("dropping %d entities without any available view", N - keep.size)
    return Dataset(skeleton.vocab, specs, [skeleton.ids[i] for i in keep], Y[keep],
                   [x[keep] for x in X], M[keep], freq[keep])


def load_language_sources(root, lang: str, need) -> LanguageSources:
    """Files ``<lang>.corpus.txt``, ``<lang>.titles.tsv``, ``<lang>.desc.tsv``, ``<lang>.vec`` under ``root``.

    ``need`` is the set of representations declared for this language; a
    missing file for a needed representation raises :class:`SourceMissing`.
    """
    root = Path(root)
    src = LanguageSources()
    files = {
        "corpus": root / f"{lang}.corpus.txt",
        "titles": root / f"{lang}.titles.tsv",
        "desc": root / f"{lang}.desc.tsv",
        "vec": root / f"{lang}.vec",
    }

    def require(key):
        if not files[key].is_file():
            raise SourceMissing(f"missing source file {files[key]}")
        return files[key]

    if Representation.CTXT in need:
        src.corpus = read_corpus(require("corpus"))
    if Representation.NAME in need:
        src.titles = read_tsv_map(require("titles"))
    if Representation.DESC in need:
        src.descriptions = read_tsv_map(require("desc"))
    if need & {Representation.NAME, Representation.DESC}:
        src.words = load_embeddings(require("vec"))
    return src


# ------------------------------------------------------------------- toy data

# settings under which the shipped toy corpus separates its two entity clusters
TOY_SGNS = SgnsConfig(dim=16, window=3, epochs=30, seed=0)


def toy_dir() -> Path:
    """Directory of the small two-language fixture shipped with the package."""
    return Path(__file__).resolve().parent / "toy"
