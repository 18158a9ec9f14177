"""Horizontal federated training: client sampling, local mixing, FedAvg.

One round, with global parameters G at round t:

1. sample k of the m clients;
2. every sampled client mixes ``F_i <- (1 - lambda) F_i + lambda G``;
3. every sampled client trains ``local_epochs`` passes on its shard;
4. the server averages the sampled clients' parameters into the new G;
5. the server evaluates the new G on its validation events (no training);
6. t <- t + 1.

Clients that are not sampled keep their parameters and optimizer state
untouched until they are next drawn. Parameters cross the client/server
boundary as flat vector snapshots.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .autodiff import AdamState, ParamStore, SchemaError
from .data.graph import BiGraph
from .data.split import ClientPartition
from .model import ModelConfig, evaluate, init_params, train_local

log = logging.getLogger(__name__)

AGGREGATIONS = ("uniform", "data-weighted")

# stream tags for seed derivation
_INIT, _SAMPLE, _TRAIN = 0, 1, 2


class FedConfigError(ValueError):
    pass


@dataclass
class FedConfig:
    m: int = 2
    k: int = 2
    lam: float = 0.2
    local_epochs: int = 2
    global_rounds: int = 15
    aggregation: str = "uniform"
    seed: int = 0

    def validate(self) -> None:
        if self.m < 1 or not 1 <= self.k <= self.m:
            raise FedConfigError(f"need 1 <= k <= m, got k={self.k}, m={self.m}")
        if not 0.0 <= self.lam <= 1.0:
            raise FedConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.local_epochs < 1 or self.global_rounds < 1:
            raise FedConfigError("local_epochs and global_rounds must be at least 1")
        if self.aggregation not in AGGREGATIONS:
            raise FedConfigError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")


@dataclass
class OptimConfig:
    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 1

    def new_state(self) -> AdamState:
        return AdamState(self.lr, self.beta1, self.beta2, self.eps)


@dataclass
class ClientState:
    client_id: int
    params: ParamStore
    partition: ClientPartition
    adam: AdamState

    @property
    def n_train(self) -> int:
        return len(self.partition.train)


@dataclass
class RoundRecord:
    round: int
    sampled: list[int]
    client_loss: dict[int, float]
    client_n: dict[int, int]
    global_objective: float
    val_loss: float
    wall_ms: float = 0.0
    val_accuracy: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "sampled": list(self.sampled),
            "client_loss": {str(k): v for k, v in self.client_loss.items()},
            "global_objective": self.global_objective,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
            "wall_ms": self.wall_ms,
        }


@dataclass
class ServerState:
    params: ParamStore
    val_indices: list[int]
    round: int = 0
    history: list[RoundRecord] = field(default_factory=list)


# -- seeds ----------------------------------------------------------------

def init_seed(seed: int) -> list[int]:
    return [seed, _INIT]


def sample_seed(seed: int, round_index: int) -> list[int]:
    return [seed, _SAMPLE, round_index]


def client_train_seed(seed: int, round_index: int, client_id: int) -> list[int]:
    """Shuffle seed for one client's local training in one round."""
    return [seed, _TRAIN, round_index, client_id]


# -- protocol pieces ------------------------------------------------------

def sample_clients(m: int, k: int, rng: np.random.Generator) -> list[int]:
    """Uniform sample of ``k`` distinct client ids out of ``range(m)``, sorted."""
    if not 1 <= k <= m:
        raise FedConfigError(f"cannot sample k={k} clients out of m={m}")
    if k == m:
        return list(range(m))
    return sorted(int(i) for i in rng.choice(m, size=k, replace=False))


def mix_local(local: np.ndarray, global_: np.ndarray, lam: float) -> np.ndarray:
    """``(1 - lam) * local + lam * global``, clamped to the segment between them."""
    local = np.asarray(local, dtype=np.float64)
    global_ = np.asarray(global_, dtype=np.float64)
    if local.shape != global_.shape:
        raise SchemaError(f"cannot mix vectors of shapes {local.shape} and {global_.shape}")
    mixed = (1.0 - lam) * local + lam * global_
    # rounding can step one ulp outside [min, max] when the endpoints are close
    return np.clip(mixed, np.minimum(local, global_), np.maximum(local, global_))


def aggregate(global_: np.ndarray, updates: Sequence[tuple[np.ndarray, int]], mode: str = "uniform") -> np.ndarray:
    """FedAvg over the participating clients.

    ``uniform``: ``G + mean(F_i - G)``. ``data-weighted``: ``sum (n_i / n) F_i``.
    Both are evaluated as offsets from the first update, which is
    algebraically the same and keeps the fixed point (all F_i equal G) and
    the single-client case exact in floating point.
    """
    if not updates:
        raise ValueError("aggregate needs at least one client update")
    global_ = np.asarray(global_, dtype=np.float64)
    for i, (vec, _) in enumerate(updates):
        if np.shape(vec) != global_.shape:
            raise SchemaError(f"update {i} has shape {np.shape(vec)}, global model has {global_.shape}")
    if mode == "uniform":
        weights = [1.0 / len(updates)] * len(updates)
    elif mode == "data-weighted":
        total = sum(n for _, n in updates)
        if total <= 0:
            raise ValueError("data-weighted aggregation needs a positive total data volume")
        weights = [n / total for _, n in updates]
    else:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    result = np.array(updates[0][0], dtype=np.float64)
    if len(updates) > 1:
        offset = np.zeros_like(result)
        for (vec, _), w in zip(updates[1:], weights[1:]):
            offset += w * (np.asarray(vec, dtype=np.float64) - updates[0][0])
        result += offset
    return result


def client_objective(losses: Sequence[float], n_i: Optional[int] = None) -> float:
    """Mean per-event loss on one client's shard."""
    if not losses:
        raise ValueError("client objective of an empty shard is undefined")
    if n_i is not None and n_i != len(losses):
        raise ValueError(f"n_i={n_i} does not match {len(losses)} loss terms")
    return math.fsum(losses) / len(losses)


def global_objective(objectives: Sequence[tuple[float, int]]) -> float:
    """Data-volume weighted combination ``sum (n_i / n) F_i``."""
    n = sum(n_i for _, n_i in objectives)
    if n <= 0:
        raise ValueError("global objective needs a positive total data volume")
    return math.fsum(f * n_i / n for f, n_i in objectives)


# -- orchestration --------------------------------------------------------

def init_federation(partitions: Sequence[ClientPartition], model_cfg: ModelConfig, opt: OptimConfig,
                    seed: int, val_indices: Optional[Sequence[int]] = None) -> tuple[ServerState, list[ClientState]]:
    """Server with freshly initialized G; every client starts from a copy of G."""
    g0 = init_params(model_cfg, init_seed(seed))
    if val_indices is None:
        val_indices = sorted(i for p in partitions for i in p.val)
    server = ServerState(g0, list(val_indices))
    clients = [ClientState(p.client_id, g0.copy(), p, opt.new_state()) for p in partitions]
    return server, clients


def run_round(server: ServerState, clients: Sequence[ClientState], graphs: Sequence[BiGraph],
              fed: FedConfig, model_cfg: ModelConfig, opt: OptimConfig) -> RoundRecord:
    """Advance the federation by one round; updates ``server`` and the sampled clients in place.

    Local training happens on copies, so a failing client leaves every
    participant and the server as they were.
    """
    if len(clients) != fed.m:
        raise FedConfigError(f"config says m={fed.m} but {len(clients)} clients were given")
    started = time.perf_counter()
    t = server.round
    g_vec = server.params.flatten()
    sampled = sample_clients(fed.m, fed.k, np.random.default_rng(sample_seed(fed.seed, t)))

    results = {}
    for cid in sampled:
        client = clients[cid]
        server.params.check_schema(client.params, f"client {cid}")
        mixed = client.params.unflatten(mix_local(client.params.flatten(), g_vec, fed.lam))
        adam = client.adam.copy()
        params, epoch_losses, _ = train_local(
            mixed, graphs, client.partition.train, fed.local_epochs, adam, model_cfg,
            seed=client_train_seed(fed.seed, t, cid), batch_size=opt.batch_size)
        results[cid] = (params, adam, epoch_losses[-1])

    for cid, (params, adam, _) in results.items():
        clients[cid].params = params
        clients[cid].adam = adam

    updates = [(clients[cid].params.flatten(), clients[cid].n_train) for cid in sampled]
    server.params = server.params.unflatten(aggregate(g_vec, updates, fed.aggregation))

    val_loss, val_acc = float("nan"), None
    if server.val_indices:
        val_loss, preds = evaluate(server.params, graphs, model_cfg, server.val_indices)
        hits = sum(p.predicted_class == graphs[i].label for p, i in zip(preds, server.val_indices))
        val_acc = hits / len(preds)

    client_loss = {cid: results[cid][2] for cid in sampled}
    client_n = {cid: clients[cid].n_train for cid in sampled}
    record = RoundRecord(
        round=t,
        sampled=sampled,
        client_loss=client_loss,
        client_n=client_n,
        global_objective=global_objective([(client_loss[c], client_n[c]) for c in sampled]),
        val_loss=val_loss,
        val_accuracy=val_acc,
        wall_ms=(time.perf_counter() - started) * 1000.0,
    )
    server.round = t + 1
    server.history.append(record)
    log.info("round %d: clients %s, val loss %.4f", t, sampled, val_loss)
    return record


def run_training(fed: FedConfig, graphs: Sequence[BiGraph], partitions: Sequence[ClientPartition],
                 model_cfg: ModelConfig, opt: OptimConfig,
                 val_indices: Optional[Sequence[int]] = None) -> tuple[list[RoundRecord], ParamStore, list[ClientState]]:
    """``global_rounds`` rounds from a fresh initialization."""
    fed.validate()
    if len(partitions) != fed.m:
        raise FedConfigError(f"config says m={fed.m} but {len(partitions)} partitions were given")
    server, clients = init_federation(partitions, model_cfg, opt, fed.seed, val_indices)
    for _ in range(fed.global_rounds):
        run_round(server, clients, graphs, fed, model_cfg, opt)
    return server.history, server.params, clients
