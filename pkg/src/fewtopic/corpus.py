"""Bag-of-words corpora: loading, filtering, writing and word splitting.

Files follow the UCI docword layout::

    N
    J
    NNZ
    docID termID count      (1-based, NNZ lines)

with a vocabulary file holding one term per line and a labels file of
``docID<TAB>category`` lines.  Each category becomes one corpus.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, DataError, ParseError

log = logging.getLogger(__name__)

MAX_SPLIT_ATTEMPTS = 100


class CountMatrix:
    """Documents x terms matrix of non-negative integer word counts.

    Stored as CSR; :meth:`dense` gives an ``int64`` array view.
    """

    __slots__ = ("csr",)

    def __init__(self, counts):
        if isinstance(counts, CountMatrix):
            csr = counts.csr.copy()
        elif sp.issparse(counts):
            csr = sp.csr_matrix(counts, dtype=np.int64)
        else:
            arr = np.asarray(counts)
            if arr.ndim != 2:
                raise ContractError(f"count matrix must be 2-D, got shape {arr.shape}")
            if not np.all(np.equal(np.mod(arr, 1), 0)):
                raise ContractError("counts must be integers")
            csr = sp.csr_matrix(arr.astype(np.int64))
        if csr.nnz and csr.data.min() < 0:
            raise ContractError("counts must be non-negative")
        csr.eliminate_zeros()
        csr.sort_indices()
        self.csr = csr

    @classmethod
    def from_triples(cls, rows, cols, counts, shape):
        return cls(sp.csr_matrix((np.asarray(counts, dtype=np.int64), (rows, cols)), shape=shape))

    @property
    def shape(self):
        return self.csr.shape

    @property
    def n_docs(self) -> int:
        return self.csr.shape[0]

    @property
    def n_terms(self) -> int:
        return self.csr.shape[1]

    @property
    def total(self) -> int:
        return int(self.csr.data.sum())

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def dense(self) -> np.ndarray:
        return self.csr.toarray()

    def triples(self):
        """(doc, term, count) arrays, 0-based, sorted by doc then term."""
        coo = self.csr.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.astype(np.int64)

    def rows(self, index) -> "CountMatrix":
        return CountMatrix(self.csr[np.asarray(index, dtype=np.intp)])

    def columns(self, index) -> "CountMatrix":
        return CountMatrix(self.csr[:, np.asarray(index, dtype=np.intp)])

    def distinct_terms_per_doc(self) -> np.ndarray:
        return np.diff(self.csr.indptr)

    def docs_per_term(self) -> np.ndarray:
        return np.bincount(self.csr.indices, minlength=self.n_terms)

    def __eq__(self, other):
        if not isinstance(other, CountMatrix):
            return NotImplemented
        return self.shape == other.shape and (self.csr != other.csr).nnz == 0

    def __add__(self, other):
        return CountMatrix(self.csr + other.csr)

    def __repr__(self):
        return f"CountMatrix(shape={self.shape}, nnz={self.nnz}, total={self.total})"


def _as_counts(X) -> CountMatrix:
    return X if isinstance(X, CountMatrix) else CountMatrix(X)


@dataclass
class CorpusSet:
    names: list
    corpora: list
    vocab: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.names) != len(self.corpora):
            raise ContractError("one name per corpus required")
        if self.corpora:
            J = self.corpora[0].n_terms
            if any(c.n_terms != J for c in self.corpora):
                raise ContractError("all corpora must share one vocabulary size")
            if self.vocab and len(self.vocab) != J:
                raise ContractError(f"vocabulary has {len(self.vocab)} terms, corpora have {J}")

    @property
    def D(self) -> int:
        return len(self.corpora)

    @property
    def J(self) -> int:
        return self.corpora[0].n_terms if self.corpora else len(self.vocab)

    def __getitem__(self, name) -> CountMatrix:
        return self.corpora[self.names.index(name)]

    def subset(self, names) -> "CorpusSet":
        missing = [n for n in names if n not in self.names]
        if missing:
            raise DataError(f"unknown categories: {', '.join(missing)}")
        return CorpusSet(list(names), [self[n] for n in names], list(self.vocab))


@dataclass
class DataSplit:
    training: CorpusSet
    validation: CorpusSet
    target_name: str
    target_support: CountMatrix
    target_eval: CountMatrix


def _read_lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().split("\n")
    except FileNotFoundError:
        raise
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text: {exc}", path) from exc


def _parse_int(token, path, lineno, what):
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"expected integer {what}, got {token!r}", path, lineno) from None


def read_docword(path):
    """Parse a docword file into a documents x terms CountMatrix."""
    lines = _read_lines(path)
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 3:
        raise ParseError("header needs three lines (N, J, NNZ)", path, len(lines) + 1)
    n_docs = _parse_int(lines[0].strip(), path, 1, "document count")
    n_terms = _parse_int(lines[1].strip(), path, 2, "term count")
    nnz = _parse_int(lines[2].strip(), path, 3, "triple count")
    if n_docs < 0 or n_terms < 0 or nnz < 0:
        raise ParseError("negative header value", path, 1)
    body = lines[3:]
    if len(body) != nnz:
        raise ParseError(f"header declares {nnz} triples, found {len(body)}", path, 3 + len(body) + 1)
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.int64)
    seen = set()
    for i, line in enumerate(body):
        lineno = i + 4
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'docID termID count', got {line!r}", path, lineno)
        d = _parse_int(parts[0], path, lineno, "docID")
        j = _parse_int(parts[1], path, lineno, "termID")
        c = _parse_int(parts[2], path, lineno, "count")
        if not 1 <= d <= n_docs:
            raise ParseError(f"docID {d} outside [1, {n_docs}]", path, lineno)
        if not 1 <= j <= n_terms:
            raise ParseError(f"termID {j} outside [1, {n_terms}]", path, lineno)
        if c < 0:
            raise ParseError(f"negative count {c}", path, lineno)
        if (d, j) in seen:
            raise ParseError(f"duplicate triple for doc {d}, term {j}", path, lineno)
        seen.add((d, j))
        rows[i], cols[i], vals[i] = d - 1, j - 1, c
    return CountMatrix.from_triples(rows, cols, vals, (n_docs, n_terms))


def read_vocab(path):
    lines = _read_lines(path)
    if lines and lines[-1] == "":
        lines.pop()
    return [line.rstrip("\r") for line in lines]


def read_labels(path, n_docs):
    """Return per-document category names (index = docID - 1)."""
    labels = [None] * n_docs
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        parts = line.rstrip("\r").split("\t")
        if len(parts) != 2 or not parts[1]:
            raise ParseError(f"expected 'docID<TAB>category', got {line!r}", path, lineno)
        d = _parse_int(parts[0], path, lineno, "docID")
        if not 1 <= d <= n_docs:
            raise ParseError(f"docID {d} outside [1, {n_docs}]", path, lineno)
        if labels[d - 1] is not None:
            raise ParseError(f"docID {d} labelled twice", path, lineno)
        labels[d - 1] = parts[1]
    unlabelled = [i + 1 for i, lab in enumerate(labels) if lab is None]
    if unlabelled:
        raise ParseError(f"{len(unlabelled)} documents without a label (first: {unlabelled[0]})", path)
    return labels


def load_corpus(docword_path, vocab_path, labels_path) -> CorpusSet:
    """Load a docword/vocab/labels triple; one corpus per category."""
    for p in (docword_path, vocab_path, labels_path):
        if not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")
    X = read_docword(docword_path)
    vocab = read_vocab(vocab_path)
    if len(vocab) != X.n_terms:
        raise ParseError(f"vocabulary has {len(vocab)} terms, docword header says {X.n_terms}", vocab_path)
    labels = read_labels(labels_path, X.n_docs)
    names = list(dict.fromkeys(labels))
    label_arr = np.array(labels, dtype=object)
    corpora = [X.rows(np.flatnonzero(label_arr == name)) for name in names]
    return CorpusSet(names, corpora, vocab)


def write_corpus(corpus_set: CorpusSet, docword_path, vocab_path, labels_path) -> None:
    """Write a CorpusSet in the format read by :func:`load_corpus`."""
    stacked = sp.vstack([c.csr for c in corpus_set.corpora], format="csr") if corpus_set.corpora else sp.csr_matrix((0, corpus_set.J), dtype=np.int64)
    X = CountMatrix(stacked)
    rows, cols, vals = X.triples()
    with open(docword_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{X.n_docs}\n{X.n_terms}\n{len(vals)}\n")
        fh.writelines(f"{r + 1} {c + 1} {v}\n" for r, c, v in zip(rows, cols, vals))
    with open(vocab_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{term}\n" for term in corpus_set.vocab)
    with open(labels_path, "w", encoding="utf-8", newline="\n") as fh:
        doc = 1
        for name, corpus in zip(corpus_set.names, corpus_set.corpora):
            for _ in range(corpus.n_docs):
                fh.write(f"{doc}\t{name}\n")
                doc += 1


def filter_corpus(raw: CorpusSet, min_doc_terms=30, min_term_docs=30) -> CorpusSet:
    """Drop short documents and rare terms until neither rule removes anything.

    A document survives if it holds at least ``min_doc_terms`` distinct
    terms; a term survives if at least ``min_term_docs`` documents across
    the whole set contain it.  Surviving terms are re-indexed compactly.
    """
    if min_doc_terms < 1 or min_term_docs < 1:
        raise ContractError("filter thresholds must be >= 1")
    if raw.D == 0:
        raise DataError("no corpora to filter")
    stacked = sp.vstack([c.csr for c in raw.corpora], format="csr")
    owner = np.repeat(np.arange(raw.D), [c.n_docs for c in raw.corpora])
    keep_docs = np.arange(stacked.shape[0])
    keep_terms = np.arange(stacked.shape[1])
    current = stacked
    while True:
        doc_ok = np.diff(current.indptr) >= min_doc_terms
        current = current[doc_ok]
        keep_docs = keep_docs[doc_ok]
        term_ok = np.bincount(current.indices, minlength=current.shape[1]) >= min_term_docs
        current = current[:, np.flatnonzero(term_ok)].tocsr()
        keep_terms = keep_terms[term_ok]
        if doc_ok.all() and term_ok.all():
            break
    names, corpora = [], []
    kept_owner = owner[keep_docs]
    for d, name in enumerate(raw.names):
        mask = kept_owner == d
        if not mask.any():
            log.warning("filtering emptied corpus %r; dropped", name)
            continue
        names.append(name)
        corpora.append(CountMatrix(current[np.flatnonzero(mask)]))
    if not corpora:
        raise DataError("filtering removed every corpus")
    vocab = [raw.vocab[j] for j in keep_terms] if raw.vocab else []
    return CorpusSet(names, corpora, vocab)


def split_words(X, R: float, rng: np.random.Generator):
    """Send each word token to the support side with probability ``R``.

    Per cell this is a Binomial(x_nj, R) draw, identical in distribution
    to flipping one coin per token.  Returns ``(support, query)`` of the
    same kind as ``X`` (CountMatrix or integer array).
    """
    if not 0.0 <= R <= 1.0:
        raise ContractError(f"support rate must lie in [0, 1], got {R}")
    if isinstance(X, CountMatrix):
        csr = X.csr
        kept = rng.binomial(csr.data, R)
        support = sp.csr_matrix((kept, csr.indices.copy(), csr.indptr.copy()), shape=csr.shape)
        query = sp.csr_matrix((csr.data - kept, csr.indices.copy(), csr.indptr.copy()), shape=csr.shape)
        return CountMatrix(support), CountMatrix(query)
    arr = np.asarray(X, dtype=np.int64)
    support = rng.binomial(arr, R)
    return support, arr - support


def _total(X) -> int:
    return X.total if isinstance(X, CountMatrix) else int(np.sum(X))


def make_target_split(target, heldout=0.2, rng=None):
    """Hold out a ``heldout`` fraction of the target's words for evaluation.

    Redraws until both sides hold at least one token (unless ``heldout``
    is 0, where evaluation is empty by definition).
    """
    if rng is None:
        raise ContractError("make_target_split needs an rng")
    if heldout == 0:
        zero = CountMatrix(sp.csr_matrix(target.shape, dtype=np.int64)) if isinstance(target, CountMatrix) else np.zeros_like(target)
        return (CountMatrix(target) if isinstance(target, CountMatrix) else np.array(target)), zero
    for _ in range(MAX_SPLIT_ATTEMPTS):
        support, evaluation = split_words(target, 1.0 - heldout, rng)
        if _total(support) > 0 and _total(evaluation) > 0:
            return support, evaluation
    raise DataError(f"could not split target into non-empty support and evaluation in {MAX_SPLIT_ATTEMPTS} attempts")


def sample_documents(corpus: CountMatrix, n: int, rng: np.random.Generator) -> CountMatrix:
    """Pick ``n`` documents without replacement (with replacement if too few)."""
    if corpus.n_docs == 0:
        raise DataError("cannot sample from an empty corpus")
    replace = corpus.n_docs < n
    index = rng.choice(corpus.n_docs, size=n, replace=replace)
    return corpus.rows(index)
