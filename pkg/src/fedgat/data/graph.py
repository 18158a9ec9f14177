from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .events import EventError, RawEvent
from .text import Vocabulary, vectorize


@dataclass
class BiGraph:
    """One event as a node-feature matrix plus both edge orientations.

    ``td_edges`` are (parent, child) pairs, ``bu_edges`` the same pairs
    swapped. Both directions share ``features`` (sparse, one row per post).
    """

    event_id: str
    features: sp.csr_matrix
    td_edges: np.ndarray
    bu_edges: np.ndarray
    label: int
    source: str = ""

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @classmethod
    def from_edges(cls, features, td_edges: Sequence[tuple[int, int]], label: int,
                   event_id: str = "", source: str = "") -> "BiGraph":
        td = np.asarray(td_edges, dtype=np.int64).reshape(-1, 2)
        feats = sp.csr_matrix(np.asarray(features, dtype=np.float64) if not sp.issparse(features) else features,
                              dtype=np.float64)
        n = feats.shape[0]
        if td.size and (td.min() < 0 or td.max() >= n):
            raise EventError(f"event {event_id}: edge endpoint outside [0, {n})")
        return cls(event_id, feats, td, td[:, ::-1].copy(), int(label), source)

    def swapped(self) -> "BiGraph":
        """The same graph with the two edge orientations exchanged."""
        return BiGraph(self.event_id, self.features, self.bu_edges.copy(), self.td_edges.copy(), self.label, self.source)


def dense_adjacency(edges: np.ndarray, n: int) -> np.ndarray:
    """``A[src, dst] = 1`` for every (src, dst) pair."""
    a = np.zeros((n, n))
    if len(edges):
        a[edges[:, 0], edges[:, 1]] = 1.0
    return a


def build_bigraph(event: RawEvent, vocab: Vocabulary, mode: str = "tfidf") -> BiGraph:
    event.validate()
    pos = {p.post_id: i for i, p in enumerate(event.posts)}
    idf = vocab.idf() if mode == "tfidf" else None
    rows = [vectorize(p.tokens, vocab, mode, idf) for p in event.posts]
    feats = sp.vstack(rows, format="csr")
    td = [(pos[a], pos[b]) for a, b in event.edges]
    return BiGraph.from_edges(feats, td, event.label_index, event.event_id, event.source)


def build_bigraphs(events: Sequence[RawEvent], vocab: Vocabulary, mode: str = "tfidf") -> list[BiGraph]:
    return [build_bigraph(ev, vocab, mode) for ev in events]
