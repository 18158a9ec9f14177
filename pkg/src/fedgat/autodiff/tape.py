"""Tensors and the reverse-mode gradient tape.

A :class:`GradTape` owns every node created while it is active. Nodes are
appended in creation order, which is already a topological order because an
operation can only consume tensors that exist. ``backward`` walks the list in
reverse once.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .params import ParamStore

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class TapeError(RuntimeError):
    pass


class Tensor:
    """Dense float64 array, optionally tracked by a tape."""

    __slots__ = ("values", "tape", "node_id", "name")

    def __init__(self, values, tape: Optional["GradTape"] = None, node_id: Optional[int] = None,
                 name: Optional[str] = None):
        self.values = np.asarray(values, dtype=np.float64)
        self.tape = tape
        self.node_id = node_id
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"


class _Node:
    __slots__ = ("parents", "backward", "param_name", "shape")

    def __init__(self, parents, backward, param_name=None, shape=None):
        self.parents = parents
        self.backward = backward
        self.param_name = param_name
        self.shape = shape


class GradTape:
    """Ordered record of operations.

    With ``enabled=False`` nothing is recorded; operations still compute
    their forward values, so the same model code serves evaluation.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._nodes: list[_Node] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def _push(self, parents, backward, param_name=None, shape=None) -> int:
        self._nodes.append(_Node(parents, backward, param_name, shape))
        return len(self._nodes) - 1

    def param(self, name: str, value) -> Tensor:
        """Leaf that receives a gradient in :meth:`backward`."""
        t = Tensor(value, self, None, name)
        if self.enabled:
            t.node_id = self._push((), None, name, t.shape)
        return t

    def constant(self, value) -> Tensor:
        """Leaf that never receives a gradient."""
        return Tensor(value, self, None)

    def params(self, store: ParamStore) -> dict[str, Tensor]:
        return {name: self.param(name, value) for name, value in store.items()}

    def record(self, values: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn) -> Tensor:
        """Create the output of an operation.

        ``backward`` maps the output gradient to one gradient per parent
        (``None`` for parents that need none).
        """
        for p in parents:
            # untracked tensors from a disabled tape act as constants
            if p.tape is not None and p.tape is not self and p.node_id is not None:
                raise TapeError("tensors from different tapes cannot be combined")
        if not self.enabled:
            return Tensor(values, self, None)
        tracked = tuple(p.node_id for p in parents)
        if all(pid is None for pid in tracked):
            return Tensor(values, self, None)
        return Tensor(values, self, self._push(tracked, backward))

    def backward(self, loss: Tensor, params: Optional[ParamStore] = None) -> ParamStore:
        """Gradients of a scalar ``loss`` for every parameter leaf.

        Parameters that ``loss`` does not depend on get zero gradients. When
        ``params`` is given, the returned store follows its schema.
        """
        if loss.tape is not self:
            raise TapeError("loss was not produced on this tape")
        if loss.size != 1:
            raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not self.enabled:
            raise TapeError("cannot differentiate through a disabled tape")

        grads: dict[int, np.ndarray] = {}
        if loss.node_id is not None:
            grads[loss.node_id] = np.ones_like(loss.values)
        leaf_grads: dict[str, np.ndarray] = {}

        for nid in range(len(self._nodes) - 1, -1, -1):
            node = self._nodes[nid]
            g = grads.pop(nid, None)
            if node.param_name is not None:
                if g is not None:
                    prev = leaf_grads.get(node.param_name)
                    leaf_grads[node.param_name] = g if prev is None else prev + g
                continue
            if g is None or node.backward is None:
                continue
            for pid, pg in zip(node.parents, node.backward(g)):
                if pid is None or pg is None:
                    continue
                prev = grads.get(pid)
                grads[pid] = pg if prev is None else prev + pg

        if params is not None:
            schema = [(name, value.shape) for name, value in params.items()]
        else:
            schema = [(n.param_name, n.shape) for n in self._nodes if n.param_name is not None]
        out = ParamStore()
        for name, shape in schema:
            if name in out:
                continue
            g = leaf_grads.get(name)
            out[name] = np.zeros(shape) if g is None else np.asarray(g, dtype=np.float64).reshape(shape)
        return out
