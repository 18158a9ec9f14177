"""Seeded synthetic rumor corpora with class-specific vocabulary."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .events import LABELS, Post, RawEvent


def synthetic_events(n_events: int, seed: int = 0, sources: Sequence[str] = ("synthetic",),
                     max_posts: int = 8, signal: float = 0.7, class_tokens: int = 12,
                     noise_tokens: int = 40, tokens_per_post: tuple[int, int] = (3, 8)) -> list[RawEvent]:
    """Balanced 4-class events on random trees.

    Each token of a post is drawn from its class's private pool with
    probability ``signal`` and from a shared noise pool otherwise. Events are
    assigned to ``sources`` in contiguous, equally sized blocks.
    """
    rng = np.random.default_rng([seed, 4242])
    pools = [[f"{lab.lower()}{j}" for j in range(class_tokens)] for lab in LABELS]
    noise = [f"w{j}" for j in range(noise_tokens)]
    events = []
    for i in range(n_events):
        label = i % len(LABELS)
        n_posts = int(rng.integers(1, max_posts + 1))
        posts = []
        for p in range(n_posts):
            k = int(rng.integers(tokens_per_post[0], tokens_per_post[1] + 1))
            toks = [pools[label][rng.integers(class_tokens)] if rng.random() < signal
                    else noise[rng.integers(noise_tokens)] for _ in range(k)]
            posts.append(Post(f"e{i}p{p}", toks))
        edges = [(f"e{i}p{int(rng.integers(p))}", f"e{i}p{p}") for p in range(1, n_posts)]
        source = sources[min(i * len(sources) // max(n_events, 1), len(sources) - 1)]
        events.append(RawEvent(f"syn{seed}-{i}", LABELS[label], posts, edges, source))
    return events
