"""Stratified train/val/test splits and client partitions."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .events import RawEvent

DEFAULT_SPLIT = (0.7, 0.1, 0.2)
STRATEGIES = ("iid", "by-dataset")


class PartitionError(ValueError):
    pass


@dataclass
class ClientPartition:
    client_id: int
    train: list[int]
    val: list[int] = field(default_factory=list)
    source: str = ""


def _by_label(indices: Sequence[int], labels: Sequence[int]) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = defaultdict(list)
    for i in indices:
        groups[labels[i]].append(i)
    return dict(sorted(groups.items()))


def _allocate(n: int, ratios: Sequence[float]) -> list[int]:
    """Split ``n`` items by ``ratios`` with largest-remainder rounding."""
    raw = [n * r for r in ratios]
    counts = [int(np.floor(x)) for x in raw]
    order = sorted(range(len(ratios)), key=lambda s: (-(raw[s] - counts[s]), s))
    for s in order[: n - sum(counts)]:
        counts[s] += 1
    return counts


def split_dataset(events: Sequence[RawEvent], ratios: Sequence[float] = DEFAULT_SPLIT,
                  seed: int = 0) -> tuple[list[int], list[int], list[int]]:
    """Label-stratified split into (train, val, test) index lists, each sorted."""
    ratios = [float(r) for r in ratios]
    if len(ratios) != 3 or any(r < 0 for r in ratios) or ratios[0] <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise PartitionError(f"split ratios must be three nonnegative numbers summing to 1 with train > 0, got {ratios}")
    n_splits = sum(r > 0 for r in ratios)
    rng = np.random.default_rng(seed)
    labels = [ev.label_index for ev in events]
    out: list[list[int]] = [[], [], []]
    for label, members in _by_label(range(len(events)), labels).items():
        if len(members) < n_splits:
            raise PartitionError(f"class {label} has {len(members)} events, fewer than {n_splits} splits")
        members = [members[j] for j in rng.permutation(len(members))]
        start = 0
        for s, count in enumerate(_allocate(len(members), ratios)):
            out[s].extend(members[start:start + count])
            start += count
    train, val, test = (sorted(part) for part in out)
    return train, val, test


def _round_robin(indices: Sequence[int], labels: Sequence[int], m: int, rng: np.random.Generator) -> list[list[int]]:
    buckets: list[list[int]] = [[] for _ in range(m)]
    turn = 0
    for _, members in _by_label(indices, labels).items():
        for j in rng.permutation(len(members)):
            buckets[turn % m].append(members[j])
            turn += 1
    return [sorted(b) for b in buckets]


def partition_clients(events: Sequence[RawEvent], train: Sequence[int], m: int, strategy: str = "iid",
                      seed: int = 0, val: Optional[Sequence[int]] = None) -> list[ClientPartition]:
    """Assign train (and optionally validation) events to ``m`` clients.

    ``iid`` deals each label's shuffled events round-robin across clients.
    ``by-dataset`` makes each distinct ``RawEvent.source`` one client, in
    order of first appearance; ``m`` must match the number of sources.
    """
    val = list(val or [])
    if m < 1:
        raise PartitionError(f"client count must be at least 1, got {m}")
    if m > len(train):
        raise PartitionError(f"{m} clients requested but only {len(train)} training events")
    labels = [ev.label_index for ev in events]
    if strategy == "iid":
        rng = np.random.default_rng([seed, 17])
        train_parts = _round_robin(train, labels, m, rng)
        val_parts = _round_robin(val, labels, m, rng)
        return [ClientPartition(i, t, v) for i, (t, v) in enumerate(zip(train_parts, val_parts))]
    if strategy == "by-dataset":
        sources: list[str] = []
        for ev in events:
            if ev.source not in sources:
                sources.append(ev.source)
        if len(sources) != m:
            raise PartitionError(f"by-dataset partitioning found {len(sources)} sources {sources} but m={m}")
        parts = []
        for cid, name in enumerate(sources):
            t = sorted(i for i in train if events[i].source == name)
            v = sorted(i for i in val if events[i].source == name)
            if not t:
                raise PartitionError(f"source {name!r} has no training events")
            parts.append(ClientPartition(cid, t, v, name))
        return parts
    raise PartitionError(f"unknown partition strategy {strategy!r}; expected one of {STRATEGIES}")
