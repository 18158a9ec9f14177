"""Reverse-mode automatic differentiation and Adam for the Bi-GAT model."""

from .adam import AdamState, adam_step
from .ops import (
    DimensionError,
    add,
    add_n,
    concat,
    cross_entropy,
    index,
    leaky_relu,
    matmul,
    max_rows,
    mean_rows,
    mul,
    relu,
    reshape,
    scale,
    segment_softmax,
    segment_sum,
    sigmoid,
    softmax_rows,
    sparse_matmul,
    sum_all,
)
from .params import ParamStore, SchemaError
from .tape import GradTape, TapeError, Tensor


def backward(loss: Tensor, params: ParamStore | None = None) -> ParamStore:
    """Differentiate ``loss`` on the tape that produced it."""
    if loss.tape is None:
        raise TapeError("loss is not attached to a tape")
    return loss.tape.backward(loss, params)


__all__ = [
    "AdamState", "DimensionError", "GradTape", "ParamStore", "SchemaError", "TapeError", "Tensor",
    "adam_step", "add", "add_n", "backward", "concat", "cross_entropy", "index", "leaky_relu", "matmul",
    "max_rows", "mean_rows", "mul", "relu", "reshape", "scale", "segment_softmax", "segment_sum", "sigmoid",
    "softmax_rows", "sparse_matmul", "sum_all",
]
