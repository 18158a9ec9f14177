"""Reference implementations that share no code with the package.

``numeric_grad`` is a central finite difference. ``naive_*`` evaluate the
attention model with explicit loops over nodes, neighbours and heads on
dense numpy arrays.
"""

import math

import numpy as np


def numeric_grad(f, x, h=1e-5):
    """Central difference of scalar ``f`` with respect to array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))


def grad_close(analytic, numeric, rtol=1e-4, atol=1e-7):
    """Relative error below ``rtol`` wherever the gradient is not negligibly small."""
    analytic, numeric = np.asarray(analytic, float), np.asarray(numeric, float)
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return bool(np.all((diff <= atol) | (diff <= rtol * scale)))


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def _leaky(x, slope):
    return x if x > 0 else slope * x


def naive_neighbours(edges, n):
    """In-neighbours of every node plus the node itself (self last)."""
    nb = [[] for _ in range(n)]
    for s, d in edges:
        nb[d].append(s)
    for i in range(n):
        nb[i].append(i)
    return nb


def naive_alpha(W, a, H, edges, i, slope=0.2):
    n = H.shape[0]
    d = W.shape[1]
    Wh = [H[r] @ W for r in range(n)]
    nb = naive_neighbours(edges, n)[i]
    scores = []
    for j in nb:
        pair = np.concatenate([Wh[i], Wh[j]])
        scores.append(_leaky(float(sum(a[t] * pair[t] for t in range(2 * d))), slope))
    top = max(scores)
    ex = [math.exp(s - top) for s in scores]
    z = sum(ex)
    return nb, [e / z for e in ex]


def naive_head(W, a, H, edges, slope=0.2):
    n = H.shape[0]
    d = W.shape[1]
    out = np.zeros((n, d))
    for i in range(n):
        nb, alpha = naive_alpha(W, a, H, edges, i, slope)
        for c in range(d):
            acc = 0.0
            for j, al in zip(nb, alpha):
                acc += al * float(H[j] @ W[:, c])
            out[i, c] = _sigmoid(acc)
    return out


def naive_layer(heads, H, edges, merge, slope=0.2):
    outs = [naive_head(W, a, H, edges, slope) for W, a in heads]
    if merge == "concat":
        merged = np.concatenate(outs, axis=1)
    else:
        merged = sum(outs) / len(outs)
    return np.maximum(merged, 0.0)


def naive_bigat_probs(params, H, td_edges, heads=5, slope=0.2):
    """Class probabilities with mean pooling, computed with loops only."""
    bu_edges = [(c, p) for p, c in td_edges]
    pooled = []
    for direction, edges in (("td", td_edges), ("bu", bu_edges)):
        h = H
        for layer, merge in ((1, "concat"), (2, "mean")):
            hp = [(params[f"{direction}.l{layer}.h{k}.W"], params[f"{direction}.l{layer}.h{k}.a"])
                  for k in range(heads)]
            h = naive_layer(hp, h, edges, merge, slope)
        pooled.append(h.mean(axis=0))
    x = np.concatenate(pooled)
    W, b = params["fc.W"], params["fc.b"]
    logits = [float(sum(x[r] * W[r, c] for r in range(len(x))) + b[c]) for c in range(W.shape[1])]
    top = max(logits)
    ex = [math.exp(v - top) for v in logits]
    return np.array([e / sum(ex) for e in ex])
