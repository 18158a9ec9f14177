from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from ..autodiff import AdamState, GradTape, ParamStore, adam_step
from ..data.graph import BiGraph
from .bigat import ModelConfig, Prediction, bigat_forward, loss_and_grad

CE_FLOOR = 1e-12


class TrainingError(RuntimeError):
    pass


def _seed_list(seed) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def epoch_order(indices: Sequence[int], seed, epoch: int) -> list[int]:
    """Shuffled visiting order of ``indices`` for one epoch."""
    rng = np.random.default_rng(_seed_list(seed) + [epoch])
    return [indices[j] for j in rng.permutation(len(indices))]


def train_local(params: ParamStore, graphs: Sequence[BiGraph], indices: Sequence[int], epochs: int,
                adam: AdamState, cfg: ModelConfig, seed=0,
                batch_size: int = 1) -> tuple[ParamStore, list[float], list[float]]:
    """Run ``epochs`` shuffled passes over ``graphs[indices]``.

    With ``batch_size`` > 1 the gradients of consecutive events are averaged
    before each Adam step. ``adam`` is advanced in place.

    Returns ``(params, mean loss per epoch, per-event losses of the last epoch)``.
    """
    if epochs < 1:
        raise TrainingError(f"epochs must be at least 1, got {epochs}")
    if not indices:
        raise TrainingError("cannot train on an empty partition")
    if batch_size < 1:
        raise TrainingError(f"batch_size must be at least 1, got {batch_size}")
    indices = list(indices)
    epoch_losses: list[float] = []
    last: list[float] = []
    for epoch in range(epochs):
        last = []
        order = epoch_order(indices, seed, epoch)
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            total: Optional[ParamStore] = None
            for i in batch:
                loss, grads, _ = loss_and_grad(params, graphs[i], cfg)
                last.append(loss)
                if total is None:
                    total = grads
                else:
                    for name in total:
                        total[name] = total[name] + grads[name]
            if len(batch) > 1:
                total = ParamStore((k, v / len(batch)) for k, v in total.items())
            params = adam_step(params, total, adam)
        epoch_losses.append(math.fsum(last) / len(last))
    return params, epoch_losses, last


def evaluate(params: ParamStore, graphs: Sequence[BiGraph], cfg: ModelConfig,
             indices: Optional[Sequence[int]] = None) -> tuple[float, list[Prediction]]:
    """Forward-only mean cross-entropy and predictions over ``graphs[indices]``."""
    chosen = list(range(len(graphs))) if indices is None else list(indices)
    if not chosen:
        raise TrainingError("cannot evaluate an empty set")
    preds, losses = [], []
    for i in chosen:
        pred = bigat_forward(params, graphs[i], cfg, GradTape(enabled=False))
        preds.append(pred)
        losses.append(-math.log(max(pred.probs[0, graphs[i].label], CE_FLOOR)))
    return math.fsum(losses) / len(losses), preds
