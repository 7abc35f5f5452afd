"""Corpus ingestion: tokenization, TF-IDF vocabulary selection, n-gram
promotion, binarization, projection onto variable subsets, and splitting."""

from __future__ import annotations

import math
import os
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

NGRAM_JOINER = "-"


@dataclass(frozen=True)
class Document:
    id: str
    tokens: tuple[str, ...]

    @property
    def empty(self) -> bool:
        # Kept in the corpus but flagged; an empty document still counts
        # toward |D| in TF-IDF and splitting.
        return len(self.tokens) == 0


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    index: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(set(self.terms)) != len(self.terms):
            raise ValueError("vocabulary terms must be unique")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.index


class TokenCorpus:
    """Documents as token multisets, plus cached term statistics."""

    def __init__(self, documents):
        self.documents: list[Document] = list(documents)
        self._stats: tuple[dict, dict] | None = None

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def _term_stats(self):
        if self._stats is None:
            total_tf: Counter = Counter()
            doc_freq: Counter = Counter()
            for doc in self.documents:
                counts = Counter(doc.tokens)
                total_tf.update(counts)
                doc_freq.update(counts.keys())
            self._stats = (dict(total_tf), dict(doc_freq))
        return self._stats

    @property
    def total_tf(self) -> dict[str, int]:
        return self._term_stats()[0]

    @property
    def doc_freq(self) -> dict[str, int]:
        return self._term_stats()[1]


@dataclass
class SparseBinaryCorpus:
    """Presence/absence matrix in sparse row form."""

    vocab: Vocabulary
    rows: list[np.ndarray]  # per document: sorted indices of present terms
    doc_ids: list[str]

    def __post_init__(self):
        if len(self.rows) != len(self.doc_ids):
            raise ValueError("rows and doc_ids must align")
        n = len(self.vocab)
        for row in self.rows:
            if len(row) and (row[-1] >= n or (np.diff(row) <= 0).any()):
                raise ValueError("rows must be strictly increasing indices into the vocabulary")

    def __len__(self):
        return len(self.rows)

    @property
    def n_docs(self) -> int:
        return len(self.rows)

    def to_binary_data(self) -> "BinaryData":
        bits = np.zeros((len(self.rows), len(self.vocab)), dtype=np.uint8)
        for i, row in enumerate(self.rows):
            bits[i, row] = 1
        return BinaryData(tuple(self.vocab.terms), bits, list(self.doc_ids))


@dataclass
class BinaryData:
    """Dense binary matrix with named columns; the working form for
    structure learning (rows are documents or completed latent values)."""

    variables: tuple[str, ...]
    bits: np.ndarray  # (n_docs, n_vars) uint8
    doc_ids: list[str] | None = None

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2 or self.bits.shape[1] != len(self.variables):
            raise ValueError("bits shape must be (n_docs, n_vars)")
        self._col = {v: i for i, v in enumerate(self.variables)}

    @property
    def n_docs(self) -> int:
        return self.bits.shape[0]

    def columns(self, names) -> np.ndarray:
        return self.bits[:, [self._col[n] for n in names]]

    def subsample(self, n: int, rng) -> "BinaryData":
        if n >= self.n_docs:
            return self
        pick = np.sort(rng.choice(self.n_docs, size=n, replace=False))
        ids = [self.doc_ids[i] for i in pick] if self.doc_ids else None
        return BinaryData(self.variables, self.bits[pick], ids)


@dataclass
class ProjectedData:
    """Distinct-case compression of data restricted to a small variable set."""

    variables: tuple[str, ...]
    patterns: np.ndarray  # (n_cases, n_vars) uint8
    counts: np.ndarray  # (n_cases,) float64 (document multiplicities)

    def __post_init__(self):
        self.patterns = np.ascontiguousarray(self.patterns, dtype=np.uint8)
        self.counts = np.asarray(self.counts, dtype=np.float64)

    @property
    def n_docs(self) -> float:
        return float(self.counts.sum())

    @property
    def cases(self) -> dict[tuple[int, ...], float]:
        return {
            tuple(int(b) for b in row): float(c)
            for row, c in zip(self.patterns, self.counts)
        }

    def marginalize(self, names) -> "ProjectedData":
        idx = [self.variables.index(n) for n in names]
        sub = self.patterns[:, idx]
        return _compress(tuple(names), sub, self.counts)


def _compress(names, bits, weights) -> ProjectedData:
    k = bits.shape[1]
    if k == 0:
        return ProjectedData(names, np.zeros((1, 0), np.uint8),
                             np.array([float(np.sum(weights))]))
    if k > 32:
        raise ValueError(f"projection width {k} exceeds the 32-variable bound")
    codes = bits.astype(np.int64) @ (np.int64(1) << np.arange(k, dtype=np.int64))
    uniq, inv = np.unique(codes, return_inverse=True)
    counts = np.bincount(inv, weights=weights, minlength=len(uniq))
    patterns = ((uniq[:, None] >> np.arange(k)) & 1).astype(np.uint8)
    return ProjectedData(names, patterns, counts)


# -- tokenization ------------------------------------------------------------


def tokenize(text: str, stopwords=frozenset()) -> tuple[str, ...]:
    """Lowercase, split on non-alphanumeric runs, drop 1-char tokens, pure
    digits and stopwords."""
    out = []
    for raw in text.lower().split():
        for tok in _split_alnum(raw):
            if len(tok) < 2 or tok.isdigit() or tok in stopwords:
                continue
            out.append(tok)
    return tuple(out)


def _split_alnum(raw: str):
    piece = []
    for ch in raw:
        if ch.isalnum():
            piece.append(ch)
        elif piece:
            yield "".join(piece)
            piece = []
    if piece:
        yield "".join(piece)


def build_corpus(texts, ids=None, stopwords=frozenset()) -> TokenCorpus:
    docs = []
    for i, text in enumerate(texts):
        doc_id = ids[i] if ids is not None else f"d{i}"
        docs.append(Document(str(doc_id), tokenize(text, stopwords)))
    return TokenCorpus(docs)


# -- TF-IDF vocabulary -------------------------------------------------------


def average_tfidf(term: str, corpus: TokenCorpus) -> float:
    """Average TF-IDF of a term over the collection: the total term count
    times ln(|D| / document frequency), divided by |D|.  Terms absent from
    the corpus score 0 (their idf is undefined)."""
    df = corpus.doc_freq.get(term, 0)
    if df == 0:
        return 0.0
    n = len(corpus)
    return corpus.total_tf[term] * math.log(n / df) / n


def _candidate_terms(corpus: TokenCorpus, min_doc_count: int):
    return [t for t, df in corpus.doc_freq.items() if df >= min_doc_count]


def select_vocabulary(corpus: TokenCorpus, n: int, min_doc_count: int = 1) -> Vocabulary:
    """The n highest average-TF-IDF terms, ties broken lexicographically.

    Terms appearing in fewer than `min_doc_count` documents are excluded
    before ranking.
    """
    if n < 1:
        raise ValueError("vocabulary size must be >= 1")
    candidates = _candidate_terms(corpus, min_doc_count)
    ranked = sorted(candidates, key=lambda t: (-average_tfidf(t, corpus), t))
    if len(ranked) < n:
        warnings.warn(
            f"only {len(ranked)} candidate terms available, requested {n}",
            stacklevel=2,
        )
    return Vocabulary(tuple(ranked[:n]))


def _gram_depth(token: str) -> int:
    return token.count(NGRAM_JOINER) + 1


def _pair_stats(corpus: TokenCorpus, max_depth: int):
    total_tf: Counter = Counter()
    doc_freq: Counter = Counter()
    for doc in corpus.documents:
        pairs = Counter(
            (a, b)
            for a, b in zip(doc.tokens, doc.tokens[1:])
            if _gram_depth(a) + _gram_depth(b) <= max_depth
        )
        total_tf.update(pairs)
        doc_freq.update(pairs.keys())
    return total_tf, doc_freq


def _rewrite(corpus: TokenCorpus, selected_pairs) -> TokenCorpus:
    # Greedy left-to-right replacement; overlapping occurrences resolve in
    # favor of the earlier pair.
    docs = []
    for doc in corpus.documents:
        toks = doc.tokens
        out = []
        i = 0
        while i < len(toks):
            if i + 1 < len(toks) and (toks[i], toks[i + 1]) in selected_pairs:
                out.append(toks[i] + NGRAM_JOINER + toks[i + 1])
                i += 2
            else:
                out.append(toks[i])
                i += 1
        docs.append(Document(doc.id, tuple(out)))
    return TokenCorpus(docs)


def promote_ngrams(corpus: TokenCorpus, n: int, max_gram: int,
                   min_doc_count: int = 1):
    """Iterative top-token picking with n-gram promotion.

    Each round scores adjacent token pairs alongside the current top-n
    single tokens; pairs that make the combined top n are rewritten into
    joined tokens and top tokens are re-picked.  Returns the final
    vocabulary together with the rewritten corpus (needed downstream,
    since the joined tokens only exist in the rewritten documents).
    """
    if max_gram not in (1, 2, 3):
        raise ValueError("max_gram must be 1, 2 or 3")
    vocab = select_vocabulary(corpus, n, min_doc_count)
    for depth in range(2, max_gram + 1):
        pair_tf, pair_df = _pair_stats(corpus, depth)
        n_docs = len(corpus)
        scored = {t: average_tfidf(t, corpus) for t in vocab.terms}
        pair_of = {}
        for pair, df in pair_df.items():
            if df < min_doc_count:
                continue
            name = pair[0] + NGRAM_JOINER + pair[1]
            score = pair_tf[pair] * math.log(n_docs / df) / n_docs
            if score >= scored.get(name, -1.0):
                scored[name] = score
                pair_of[name] = pair
        top = sorted(scored, key=lambda t: (-scored[t], t))[:n]
        selected_pairs = {pair_of[t] for t in top if t in pair_of}
        if selected_pairs:
            corpus = _rewrite(corpus, selected_pairs)
        vocab = select_vocabulary(corpus, n, min_doc_count)
    return vocab, corpus


# -- binarization, projection, splitting -------------------------------------


def binarize(corpus: TokenCorpus, vocab: Vocabulary) -> SparseBinaryCorpus:
    """Presence/absence rows; term counts are discarded here."""
    if len(vocab) == 0:
        raise ValueError("vocabulary must be nonempty")
    rows = []
    for doc in corpus.documents:
        present = {vocab.index[t] for t in doc.tokens if t in vocab.index}
        rows.append(np.array(sorted(present), dtype=np.int32))
    return SparseBinaryCorpus(vocab, rows, [d.id for d in corpus.documents])


def as_binary_data(data) -> BinaryData:
    if isinstance(data, BinaryData):
        return data
    if isinstance(data, SparseBinaryCorpus):
        return data.to_binary_data()
    raise TypeError(f"cannot interpret {type(data).__name__} as binary data")


def project(data, names) -> ProjectedData:
    """Distinct assignment patterns of `names` with multiplicities."""
    bd = as_binary_data(data)
    names = tuple(names)
    bits = bd.columns(names) if names else np.zeros((bd.n_docs, 0), np.uint8)
    return _compress(names, bits, np.ones(bd.n_docs))


def split(data, train_fraction: float, seed: int):
    """Deterministic train/test split; train size rounds half up."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    bd = as_binary_data(data)
    n = bd.n_docs
    if n < 2:
        raise ValueError("need at least 2 documents to split")
    n_train = int(math.floor(train_fraction * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(order[:n_train])
    test_idx = np.sort(order[n_train:])
    return _take(data, bd, train_idx), _take(data, bd, test_idx)


def _take(original, bd: BinaryData, idx):
    ids = [bd.doc_ids[i] for i in idx] if bd.doc_ids else None
    if isinstance(original, SparseBinaryCorpus):
        return SparseBinaryCorpus(
            original.vocab,
            [original.rows[i] for i in idx],
            [original.doc_ids[i] for i in idx],
        )
    return BinaryData(bd.variables, bd.bits[idx], ids)


# -- files -------------------------------------------------------------------


def read_stopwords(path) -> frozenset:
    with open(path, "r", encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


def read_documents(path) -> tuple[list[str], list[str]]:
    """Raw texts plus ids from a directory of .txt files (one document
    each) or a single file with one document per line."""
    if os.path.isdir(path):
        names = sorted(f for f in os.listdir(path) if f.endswith(".txt"))
        if not names:
            raise ValueError(f"no .txt files in {path}")
        texts, ids = [], []
        for name in names:
            with open(os.path.join(path, name), "r", encoding="utf-8") as fh:
                texts.append(fh.read())
            ids.append(os.path.splitext(name)[0])
        return texts, ids
    with open(path, "r", encoding="utf-8") as fh:
        texts = fh.read().splitlines()
    return texts, [f"d{i}" for i in range(len(texts))]


def write_vocabulary(vocab: Vocabulary, path):
    with open(path, "w", encoding="utf-8") as fh:
        for term in vocab.terms:
            fh.write(term + "\n")


def read_vocabulary(path) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as fh:
        return Vocabulary(tuple(line.strip() for line in fh if line.strip()))


def write_sparse_corpus(corpus: SparseBinaryCorpus, path):
    """Header `N_DOCS N_TERMS`, then one line per document:
    `doc_id idx idx ...` with strictly increasing term indices."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(corpus.rows)} {len(corpus.vocab)}\n")
        for doc_id, row in zip(corpus.doc_ids, corpus.rows):
            safe_id = "_".join(doc_id.split())
            fh.write(" ".join([safe_id] + [str(int(i)) for i in row]) + "\n")


def read_sparse_corpus(path, vocab: Vocabulary) -> SparseBinaryCorpus:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("corpus file must start with 'N_DOCS N_TERMS'")
        n_docs, n_terms = int(header[0]), int(header[1])
        if n_terms != len(vocab):
            raise ValueError(
                f"corpus file has {n_terms} terms but the vocabulary has {len(vocab)}"
            )
        rows, ids = [], []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids.append(parts[0])
            rows.append(np.array([int(p) for p in parts[1:]], dtype=np.int32))
    if len(rows) != n_docs:
        raise ValueError(f"corpus file declares {n_docs} documents, found {len(rows)}")
    return SparseBinaryCorpus(vocab, rows, ids)


def evidence_matrix(data, names):
    """Normalize any supported data form to (bits, weights) aligned to
    `names`; weights carry distinct-case multiplicities."""
    names = list(names)
    if isinstance(data, ProjectedData):
        if list(data.variables) == names:
            return data.patterns, data.counts
        sub = data.marginalize(names)
        return sub.patterns, sub.counts
    bd = as_binary_data(data)
    return bd.columns(names), np.ones(bd.n_docs)
