"""Bidirectional two-layer multi-head graph attention classifier.

Per head, node ``i`` attends over its in-neighbours plus itself::

    e_ij  = LeakyReLU(a_i . Wh_i + a_j . Wh_j)     (a = [a_i || a_j])
    alpha = softmax_j(e_ij)
    h'_i  = sigmoid(sum_j alpha_ij Wh_j)

Layer 1 concatenates its heads, layer 2 averages them, and both apply ReLU
to the merged result. The top-down stack runs on parent->child edges, the
bottom-up stack on child->parent edges; each stack's node features are
pooled to one vector, the two vectors are concatenated and fed to a linear
layer with a row softmax.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .. import autodiff as ad
from ..autodiff import GradTape, ParamStore, Tensor
from ..data.graph import BiGraph

DIRECTIONS = ("td", "bu")
N_LAYERS = 2
POOLINGS = ("mean", "max", "root")


@dataclass
class ModelConfig:
    in_dim: int = 5000
    hidden_dim: int = 64
    heads: int = 5
    pooling: str = "mean"
    leaky_slope: float = 0.2
    n_classes: int = 4

    def layer_dims(self) -> list[tuple[int, int]]:
        """(input width, per-head output width) of each layer."""
        return [(self.in_dim, self.hidden_dim), (self.heads * self.hidden_dim, self.hidden_dim)]


@dataclass
class Prediction:
    probs: np.ndarray
    predicted_class: int

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "Prediction":
        probs = np.asarray(probs, dtype=np.float64).reshape(1, -1)
        return cls(probs, int(np.argmax(probs[0])))


def head_name(direction: str, layer: int, head: int, what: str) -> str:
    return f"{direction}.l{layer + 1}.h{head}.{what}"


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(cfg: ModelConfig, seed) -> ParamStore:
    """Glorot-uniform weights and attention vectors, zero bias."""
    rng = np.random.default_rng(seed)
    store = ParamStore()
    for direction in DIRECTIONS:
        for layer, (d_in, d_out) in enumerate(cfg.layer_dims()):
            for h in range(cfg.heads):
                store[head_name(direction, layer, h, "W")] = _glorot(rng, d_in, d_out, (d_in, d_out))
                store[head_name(direction, layer, h, "a")] = _glorot(rng, 2 * d_out, 1, (2 * d_out,))
    store["fc.W"] = _glorot(rng, 2 * cfg.hidden_dim, cfg.n_classes, (2 * cfg.hidden_dim, cfg.n_classes))
    store["fc.b"] = np.zeros(cfg.n_classes)
    return store


def swap_directions(params: ParamStore) -> ParamStore:
    """Exchange the two direction stacks, including the halves of ``fc.W`` that read them."""
    out = ParamStore()
    for name, value in params.items():
        direction, _, rest = name.partition(".")
        if direction in DIRECTIONS:
            other = DIRECTIONS[1 - DIRECTIONS.index(direction)]
            out[name] = params[f"{other}.{rest}"].copy()
        elif name == "fc.W":
            half = value.shape[0] // 2
            out[name] = np.concatenate([value[half:], value[:half]])
        else:
            out[name] = value.copy()
    return out


def with_self_loops(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(src, dst) arrays of the edge list plus one self loop per node."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    loops = np.arange(n, dtype=np.int64)
    return np.concatenate([edges[:, 0], loops]), np.concatenate([edges[:, 1], loops])


def _transform(h, W: Tensor) -> Tensor:
    if sp.issparse(h):
        return ad.sparse_matmul(h, W)
    if not isinstance(h, Tensor):
        h = Tensor(h)
    return ad.matmul(h, W)


def _attention(z: Tensor, a: Tensor, src: np.ndarray, dst: np.ndarray, n: int, slope: float) -> Tensor:
    d = z.shape[1]
    a_recv = ad.reshape(ad.index(a, slice(0, d)), (d, 1))
    a_send = ad.reshape(ad.index(a, slice(d, 2 * d)), (d, 1))
    logits = ad.add(ad.index(ad.matmul(z, a_recv), dst), ad.index(ad.matmul(z, a_send), src))
    return ad.segment_softmax(ad.leaky_relu(logits, slope), dst, n)


def attention_coefficients(W, a, H, edges, node: int, slope: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Attention of ``node`` over its in-neighbours and itself.

    Returns ``(neighbours, alpha)``; the self entry comes last.
    """
    n = H.shape[0]
    src, dst = with_self_loops(edges, n)
    z = _transform(H, Tensor(W))
    alpha = _attention(z, Tensor(a), src, dst, n, slope).values.reshape(-1)
    mask = dst == node
    return src[mask], alpha[mask]


def head_forward(W: Tensor, a: Tensor, H, src: np.ndarray, dst: np.ndarray, n: int,
                 slope: float) -> Tensor:
    z = _transform(H, W)
    alpha = _attention(z, a, src, dst, n, slope)
    messages = ad.mul(ad.index(z, src), alpha)
    return ad.sigmoid(ad.segment_sum(messages, dst, n))


def gat_layer_forward(heads: Sequence[tuple[Tensor, Tensor]], H, edges, merge: str,
                      slope: float = 0.2) -> Tensor:
    """One attention layer: every head, then concat or mean, then ReLU."""
    n = H.shape[0]
    src, dst = with_self_loops(edges, n)
    outs = [head_forward(W, a, H, src, dst, n, slope) for W, a in heads]
    if merge == "concat":
        merged = ad.concat(outs, axis=1)
    elif merge == "mean":
        merged = ad.scale(ad.add_n(outs), 1.0 / len(outs))
    else:
        raise ValueError(f"unknown merge rule {merge!r}")
    return ad.relu(merged)


def root_index(g: BiGraph) -> int:
    children = set(g.td_edges[:, 1].tolist()) if len(g.td_edges) else set()
    for i in range(g.n_nodes):
        if i not in children:
            return i
    return 0


def _pool(h: Tensor, how: str, root: int) -> Tensor:
    if how == "mean":
        return ad.mean_rows(h)
    if how == "max":
        return ad.max_rows(h)
    if how == "root":
        return ad.index(h, slice(root, root + 1))
    raise ValueError(f"unknown pooling {how!r}")


def direction_forward(p: dict[str, Tensor], direction: str, g: BiGraph, cfg: ModelConfig) -> Tensor:
    edges = g.td_edges if direction == "td" else g.bu_edges
    h = g.features
    for layer in range(N_LAYERS):
        heads = [(p[head_name(direction, layer, k, "W")], p[head_name(direction, layer, k, "a")])
                 for k in range(cfg.heads)]
        h = gat_layer_forward(heads, h, edges, "concat" if layer == 0 else "mean", cfg.leaky_slope)
    return h


def forward_probs(p: dict[str, Tensor], g: BiGraph, cfg: ModelConfig) -> Tensor:
    root = root_index(g) if cfg.pooling == "root" else 0
    pooled = [_pool(direction_forward(p, d, g, cfg), cfg.pooling, root) for d in DIRECTIONS]
    logits = ad.add(ad.matmul(ad.concat(pooled, axis=1), p["fc.W"]), p["fc.b"])
    return ad.softmax_rows(logits)


def bigat_forward(params: ParamStore, g: BiGraph, cfg: ModelConfig, tape: Optional[GradTape] = None) -> Prediction:
    if tape is None:
        tape = GradTape(enabled=False)
    probs = forward_probs(tape.params(params), g, cfg)
    return Prediction.from_probs(probs.values)


def event_loss(params: ParamStore, g: BiGraph, cfg: ModelConfig, tape: GradTape) -> tuple[Tensor, Tensor]:
    """(cross-entropy loss, probabilities) for one event, recorded on ``tape``."""
    probs = forward_probs(tape.params(params), g, cfg)
    return ad.cross_entropy(probs, g.label), probs


def loss_and_grad(params: ParamStore, g: BiGraph, cfg: ModelConfig) -> tuple[float, ParamStore, np.ndarray]:
    tape = GradTape()
    loss, probs = event_loss(params, g, cfg, tape)
    return loss.item(), tape.backward(loss, params), probs.values
