"""Rumor events: the normalized record, the raw Twitter15/16 loader and JSONL I/O."""

from __future__ import annotations

import ast
import json
import logging
import os
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .text import tokenize

log = logging.getLogger(__name__)

LABELS = ("NR", "FR", "TR", "UR")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}

# label.txt spellings used by the published Twitter15/16 release
_LABEL_ALIASES = {
    "non-rumor": "NR", "nonrumor": "NR", "non_rumor": "NR", "nr": "NR",
    "false": "FR", "fr": "FR",
    "true": "TR", "tr": "TR",
    "unverified": "UR", "ur": "UR",
}


class DatasetError(Exception):
    """Unreadable or structurally invalid dataset input."""


class EventError(DatasetError):
    pass


def normalize_label(raw: str) -> str:
    try:
        return _LABEL_ALIASES[raw.strip().lower()]
    except KeyError:
        raise DatasetError(f"unknown label {raw!r}") from None


@dataclass
class Post:
    post_id: str
    tokens: list[str] = field(default_factory=list)


@dataclass
class RawEvent:
    event_id: str
    label: str
    posts: list[Post]
    edges: list[tuple[str, str]]
    source: str = ""

    @property
    def label_index(self) -> int:
        return LABEL_INDEX[self.label]

    def root(self) -> str:
        children = {c for _, c in self.edges}
        roots = [p.post_id for p in self.posts if p.post_id not in children]
        if len(roots) != 1:
            raise EventError(f"event {self.event_id}: expected exactly one root post, found {len(roots)}")
        return roots[0]

    def validate(self) -> None:
        """Check the tree invariants: known label, one root, known endpoints, no cycles."""
        if self.label not in LABEL_INDEX:
            raise EventError(f"event {self.event_id}: unknown label {self.label!r}")
        ids = [p.post_id for p in self.posts]
        if not ids:
            raise EventError(f"event {self.event_id}: no posts")
        known = set(ids)
        if len(known) != len(ids):
            raise EventError(f"event {self.event_id}: duplicate post ids")
        parent_of: dict[str, str] = {}
        for parent, child in self.edges:
            if parent not in known or child not in known:
                raise EventError(f"event {self.event_id}: edge ({parent}, {child}) references an unknown post")
            if child in parent_of:
                raise EventError(f"event {self.event_id}: post {child} has more than one parent")
            parent_of[child] = parent
        root = self.root()
        children: dict[str, list[str]] = {}
        for parent, child in self.edges:
            children.setdefault(parent, []).append(child)
        seen = {root}
        queue = deque([root])
        while queue:
            for c in children.get(queue.popleft(), ()):
                if c in seen:
                    raise EventError(f"event {self.event_id}: cycle through post {c}")
                seen.add(c)
                queue.append(c)
        if seen != known:
            raise EventError(f"event {self.event_id}: {len(known - seen)} posts unreachable from the root (cycle)")

    def to_json(self) -> dict:
        out = {
            "event_id": self.event_id,
            "label": self.label,
            "posts": [{"id": p.post_id, "tokens": list(p.tokens)} for p in self.posts],
            "edges": [[a, b] for a, b in self.edges],
        }
        if self.source:
            out["source"] = self.source
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "RawEvent":
        return cls(
            event_id=str(obj["event_id"]),
            label=normalize_label(obj["label"]) if obj["label"] not in LABEL_INDEX else obj["label"],
            posts=[Post(str(p["id"]), [str(t) for t in p.get("tokens", [])]) for p in obj["posts"]],
            edges=[(str(a), str(b)) for a, b in obj.get("edges", [])],
            source=str(obj.get("source", "")),
        )


# -- JSONL ---------------------------------------------------------------

def write_jsonl(events: Iterable[RawEvent], path: str | os.PathLike) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
            n += 1
    return n


def read_jsonl(path: str | os.PathLike, source: Optional[str] = None) -> list[RawEvent]:
    """Read normalized events; ``source`` overrides any per-event source name."""
    events = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                ev = RawEvent.from_json(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: malformed event: {exc}") from exc
            if source is not None:
                ev.source = source
            ev.validate()
            events.append(ev)
    return events


# -- raw Twitter15/16 layout ----------------------------------------------

def read_label_file(label_file: str | os.PathLike) -> list[tuple[str, str]]:
    """``label:event_id`` lines -> ``[(event_id, label)]`` in file order."""
    try:
        text = Path(label_file).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read label file {label_file}: {exc}") from exc
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        label, sep, event_id = line.partition(":")
        if not sep or not event_id.strip():
            raise DatasetError(f"{label_file}:{lineno}: expected 'label:event_id', got {line!r}")
        out.append((event_id.strip(), normalize_label(label)))
    return out


def read_source_texts(path: str | os.PathLike) -> dict[str, str]:
    """``source_tweets.txt``: ``tweet_id<TAB>text`` per line."""
    texts = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tid, sep, text = line.rstrip("\n").partition("\t")
            if sep:
                texts[tid.strip()] = text
    return texts


def _parse_tree_line(line: str) -> tuple[list[str], list[str]]:
    left, sep, right = line.partition("->")
    if not sep:
        raise ValueError("missing '->'")
    parent = [str(x) for x in ast.literal_eval(left.strip())]
    child = [str(x) for x in ast.literal_eval(right.strip())]
    if len(parent) != 3 or len(child) != 3:
        raise ValueError("expected [uid, tweet_id, delay] on both sides")
    return parent, child


def parse_tree_file(path: Path, event_id: str, label: str, source_texts: dict[str, str]) -> RawEvent:
    """Build a RawEvent from one ``tree/<event_id>.txt`` file.

    Nodes are keyed by the full ``uid|tweet_id|delay`` triple, since the same
    tweet id recurs for every retweet. Only the source tweet has text in the
    public release; other posts get empty token lists. A child seen twice keeps
    its first parent, and posts not reachable from the root are dropped.
    """
    root_key = None
    order: list[str] = []
    parent_of: dict[str, str] = {}
    tweet_of: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                parent, child = _parse_tree_line(line)
            except (ValueError, SyntaxError) as exc:
                log.warning("%s:%d: skipping malformed tree line (%s)", path, lineno, exc)
                continue
            ckey = "|".join(child)
            if parent[0] == "ROOT":
                if root_key is None:
                    root_key = ckey
                    order.append(ckey)
                    tweet_of[ckey] = child[1]
                continue
            pkey = "|".join(parent)
            if pkey == ckey or ckey in parent_of or ckey == root_key:
                continue
            if pkey not in tweet_of:
                order.append(pkey)
                tweet_of[pkey] = parent[1]
            if ckey not in tweet_of:
                order.append(ckey)
                tweet_of[ckey] = child[1]
            parent_of[ckey] = pkey
    if root_key is None:
        raise EventError(f"event {event_id}: tree file {path} has no ROOT line")

    children: dict[str, list[str]] = {}
    for c in order:
        if c in parent_of:
            children.setdefault(parent_of[c], []).append(c)
    reachable = {root_key}
    queue = deque([root_key])
    while queue:
        for c in children.get(queue.popleft(), ()):
            if c not in reachable:
                reachable.add(c)
                queue.append(c)
    kept = [k for k in order if k in reachable]
    posts = []
    for k in kept:
        tokens = tokenize(source_texts.get(tweet_of[k], "")) if k == root_key else []
        posts.append(Post(k, tokens))
    edges = [(parent_of[k], k) for k in kept if k in parent_of]
    return RawEvent(event_id, label, posts, edges)


def load_raw_dataset(tree_dir: str | os.PathLike, label_file: str | os.PathLike,
                     source_text_file: Optional[str | os.PathLike] = None,
                     source: str = "") -> list[RawEvent]:
    """Load the published Twitter15/16 layout into RawEvents, in label-file order.

    Events whose tree file is missing are skipped with a warning; the count is
    logged. If ``source_text_file`` is omitted, ``source_tweets.txt`` next to
    the label file is used when present.
    """
    labels = read_label_file(label_file)
    if source_text_file is None:
        candidate = Path(label_file).with_name("source_tweets.txt")
        source_text_file = candidate if candidate.exists() else None
    texts = read_source_texts(source_text_file) if source_text_file else {}

    tree_dir = Path(tree_dir)
    events, missing = [], 0
    for event_id, label in labels:
        path = tree_dir / f"{event_id}.txt"
        if not path.exists():
            log.warning("no tree file for event %s (%s)", event_id, path)
            missing += 1
            continue
        ev = parse_tree_file(path, event_id, label, texts)
        ev.source = source
        events.append(ev)
    if missing:
        log.warning("skipped %d of %d labeled events without tree files", missing, len(labels))
    return events
