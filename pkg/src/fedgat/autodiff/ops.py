"""Differentiable operations on :class:`Tensor`.

Every function reads ``.values`` from its inputs, computes the forward result
with numpy and registers a closure mapping the output gradient back to the
inputs. Broadcasting in ``add``/``mul`` is undone in the backward pass by
summing over the broadcast axes.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .tape import GradTape, Tensor

N_CLASSES = 4
CE_CLAMP = 1e-12


class DimensionError(ValueError):
    pass


_NO_GRAD = GradTape(enabled=False)


def _tape_of(*xs: Tensor) -> GradTape:
    for x in xs:
        if x.tape is not None and x.tape.enabled:
            return x.tape
    return _NO_GRAD


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.values, b.values
    return _tape_of(a, b).record(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def sparse_matmul(x: sp.spmatrix, w: Tensor) -> Tensor:
    """``x @ w`` for a constant sparse ``x``; only ``w`` receives a gradient."""
    if x.shape[1] != w.shape[0]:
        raise DimensionError(f"sparse_matmul: cannot multiply {x.shape} by {w.shape}")
    x = sp.csr_matrix(x)
    xt = x.T.tocsr()
    return _tape_of(w).record(np.asarray(x @ w.values), (w,), lambda g: (np.asarray(xt @ g),))


def add(a: Tensor, b: Tensor) -> Tensor:
    sa, sb = a.shape, b.shape
    return _tape_of(a, b).record(a.values + b.values, (a, b),
                                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.values, b.values
    return _tape_of(a, b).record(av * bv, (a, b),
                                 lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def scale(x: Tensor, c: float) -> Tensor:
    return _tape_of(x).record(x.values * c, (x,), lambda g: (g * c,))


def add_n(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise DimensionError("add_n needs at least one tensor")
    shape = parts[0].shape
    for i, p in enumerate(parts):
        if p.shape != shape:
            raise DimensionError(f"add_n: part {i} has shape {p.shape}, expected {shape}")
    total = parts[0].values.copy()
    for p in parts[1:]:
        total += p.values
    return _tape_of(*parts).record(total, tuple(parts), lambda g: tuple(g for _ in parts))


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = x.shape
    return _tape_of(x).record(x.values.reshape(shape), (x,), lambda g: (g.reshape(old),))


def index(x: Tensor, key) -> Tensor:
    """``x[key]`` for basic slices or integer index arrays; repeated indices accumulate."""
    xv = x.values

    def back(g):
        full = np.zeros_like(xv)
        np.add.at(full, key, g)
        return (full,)

    return _tape_of(x).record(xv[key], (x,), back)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    if not 0.0 <= slope < 1.0:
        raise ValueError(f"leaky_relu slope must lie in [0, 1), got {slope}")
    xv = x.values
    d = np.where(xv > 0, 1.0, slope)
    return _tape_of(x).record(xv * d, (x,), lambda g: (g * d,))


def relu(x: Tensor) -> Tensor:
    xv = x.values
    mask = (xv > 0).astype(np.float64)
    return _tape_of(x).record(xv * mask, (x,), lambda g: (g * mask,))


def _stable_sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _stable_sigmoid(x.values)
    return _tape_of(x).record(y, (x,), lambda g: (g * y * (1.0 - y),))


def softmax_rows(x: Tensor) -> Tensor:
    xv = x.values
    if xv.ndim != 2:
        raise DimensionError(f"softmax_rows expects a matrix, got shape {x.shape}")
    e = np.exp(xv - xv.max(axis=1, keepdims=True))
    y = e / e.sum(axis=1, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _tape_of(x).record(y, (x,), back)


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not parts:
        raise DimensionError("concat needs at least one tensor")
    ref = parts[0].shape
    ndim = len(ref)
    axis = axis % ndim
    for i, p in enumerate(parts):
        if len(p.shape) != ndim or any(p.shape[d] != ref[d] for d in range(ndim) if d != axis):
            raise DimensionError(f"concat: part {i} has shape {p.shape}, incompatible with {ref} along axis {axis}")
    if len(parts) == 1:
        return parts[0]
    cuts = np.cumsum([p.shape[axis] for p in parts])[:-1]
    out = np.concatenate([p.values for p in parts], axis=axis)
    return _tape_of(*parts).record(out, tuple(parts), lambda g: tuple(np.split(g, cuts, axis=axis)))


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _tape_of(x).record(np.array(x.values.sum()), (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean_rows(x: Tensor) -> Tensor:
    """Column-wise mean over rows: ``[n, d] -> [1, d]``."""
    n = x.shape[0]
    return _tape_of(x).record(x.values.mean(axis=0, keepdims=True), (x,),
                              lambda g: (np.broadcast_to(g / n, x.shape).copy(),))


def max_rows(x: Tensor) -> Tensor:
    """Column-wise max over rows; ties send the gradient to the first maximum."""
    xv = x.values
    arg = xv.argmax(axis=0)
    cols = np.arange(xv.shape[1])

    def back(g):
        full = np.zeros_like(xv)
        full[arg, cols] = g.reshape(-1)
        return (full,)

    return _tape_of(x).record(xv[arg, cols][None, :], (x,), back)


def segment_sum(x: Tensor, segments: np.ndarray, n_segments: int) -> Tensor:
    """Sum rows of ``x`` that share a segment id: ``[E, d] -> [n_segments, d]``."""
    xv = x.values
    out = np.zeros((n_segments,) + xv.shape[1:])
    np.add.at(out, segments, xv)
    return _tape_of(x).record(out, (x,), lambda g: (g[segments],))


def segment_softmax(x: Tensor, segments: np.ndarray, n_segments: int) -> Tensor:
    """Softmax of ``x`` ([E] or [E, 1]) taken separately within each segment."""
    xv = x.values
    flat = xv.reshape(-1)
    peak = np.full(n_segments, -np.inf)
    np.maximum.at(peak, segments, flat)
    e = np.exp(flat - peak[segments])
    denom = np.zeros(n_segments)
    np.add.at(denom, segments, e)
    y = (e / denom[segments]).reshape(xv.shape)

    def back(g):
        gy = (g * y).reshape(-1)
        dot = np.zeros(n_segments)
        np.add.at(dot, segments, gy)
        return (y * (g - dot[segments].reshape(xv.shape)),)

    return _tape_of(x).record(y, (x,), back)


def cross_entropy(probs: Tensor, label: int) -> Tensor:
    """``-log(probs[0, label])`` with the probability clamped at 1e-12."""
    if probs.values.ndim != 2 or probs.shape[0] != 1:
        raise DimensionError(f"cross_entropy expects a [1, C] row, got shape {probs.shape}")
    n_classes = probs.shape[1]
    if not isinstance(label, (int, np.integer)) or not 0 <= label < n_classes:
        raise ValueError(f"label {label!r} out of range [0, {n_classes})")
    p = probs.values[0, label]
    clamped = max(p, CE_CLAMP)

    def back(g):
        full = np.zeros_like(probs.values)
        if p > CE_CLAMP:
            full[0, label] = -g / p
        return (full,)

    return _tape_of(probs).record(np.array(-np.log(clamped)), (probs,), back)
