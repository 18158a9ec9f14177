"""Tokenization, vocabulary and TF-IDF vectors."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

VOCAB_SIZE = 5000

_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase, then split on whitespace and punctuation."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    """Up to ``capacity`` tokens ranked by document frequency.

    ``n_docs`` is the number of training documents (posts) the frequencies
    were counted over; it feeds the idf term.
    """

    tokens: list[str]
    doc_freq: list[int]
    n_docs: int
    capacity: int = VOCAB_SIZE
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        if len(self.tokens) > self.capacity:
            raise ValueError(f"{len(self.tokens)} tokens exceed capacity {self.capacity}")

    def __len__(self) -> int:
        return len(self.tokens)

    def idf(self) -> np.ndarray:
        df = np.asarray(self.doc_freq, dtype=np.float64)
        return np.log((1.0 + self.n_docs) / (1.0 + df))


def build_vocabulary(documents: Iterable[Sequence[str]], size: int = VOCAB_SIZE) -> Vocabulary:
    """Keep the ``size`` tokens with the highest document frequency.

    Ties are broken lexicographically, so equal-frequency tokens get indices
    in sorted order.
    """
    if size < 1:
        raise ValueError(f"vocabulary size must be positive, got {size}")
    df: Counter[str] = Counter()
    n_docs = 0
    for doc in documents:
        n_docs += 1
        df.update(set(doc))
    if not df:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[:size]
    return Vocabulary([t for t, _ in ranked], [c for _, c in ranked], n_docs, size)


def vectorize(tokens: Sequence[str], vocab: Vocabulary, mode: str = "tfidf",
              idf: np.ndarray | None = None) -> sp.csr_matrix:
    """One post as a ``1 x capacity`` sparse row.

    ``tfidf``: raw term count times ``ln((1+N)/(1+df))``. ``tf``: raw counts.
    Out-of-vocabulary tokens are dropped.
    """
    counts = Counter(vocab.index[t] for t in tokens if t in vocab.index)
    cols = np.fromiter(sorted(counts), dtype=np.int64, count=len(counts))
    vals = np.array([counts[c] for c in cols], dtype=np.float64)
    if mode == "tfidf":
        if idf is None:
            idf = vocab.idf()
        vals = vals * idf[cols]
    elif mode != "tf":
        raise ValueError(f"unknown feature mode {mode!r}")
    keep = vals != 0
    return sp.csr_matrix((vals[keep], (np.zeros(int(keep.sum()), dtype=np.int64), cols[keep])),
                         shape=(1, vocab.capacity))


def vectorize_tfidf(tokens: Sequence[str], vocab: Vocabulary) -> sp.csr_matrix:
    return vectorize(tokens, vocab, "tfidf")

