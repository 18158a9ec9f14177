"""Rumor datasets: loading, TF-IDF features, bidirectional graphs, splits."""

from .events import (
    LABEL_INDEX,
    LABELS,
    DatasetError,
    EventError,
    Post,
    RawEvent,
    load_raw_dataset,
    read_jsonl,
    write_jsonl,
)
from .graph import BiGraph, build_bigraph, build_bigraphs, dense_adjacency
from .split import ClientPartition, PartitionError, partition_clients, split_dataset
from .synthetic import synthetic_events
from .text import VOCAB_SIZE, Vocabulary, build_vocabulary, tokenize, vectorize, vectorize_tfidf

__all__ = [
    "LABELS", "LABEL_INDEX", "VOCAB_SIZE", "BiGraph", "ClientPartition", "DatasetError", "EventError",
    "PartitionError", "Post", "RawEvent", "Vocabulary", "build_bigraph", "build_bigraphs", "build_vocabulary",
    "dense_adjacency", "load_raw_dataset", "partition_clients", "read_jsonl", "split_dataset",
    "synthetic_events", "tokenize", "vectorize", "vectorize_tfidf", "write_jsonl",
]
