from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .params import ParamStore, SchemaError


@dataclass
class AdamState:
    """Moment accumulators and step counter for one set of parameters."""

    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: ParamStore = field(default_factory=ParamStore)
    v: ParamStore = field(default_factory=ParamStore)

    def copy(self) -> "AdamState":
        return AdamState(self.lr, self.beta1, self.beta2, self.eps, self.step, self.m.copy(), self.v.copy())


@numba.njit(cache=True)
def _fused_update(p, g, m, v, out, b1, b2, step_size, inv_bc2, eps):
    for i in range(p.size):
        gi = g[i]
        mi = b1 * m[i] + (1.0 - b1) * gi
        vi = b2 * v[i] + (1.0 - b2) * (gi * gi)
        m[i] = mi
        v[i] = vi
        out[i] = p[i] - step_size * mi / (np.sqrt(vi * inv_bc2) + eps)


def adam_step(params: ParamStore, grads: ParamStore, state: AdamState) -> ParamStore:
    """One bias-corrected Adam update. Returns new parameters; ``state`` is advanced in place."""
    params.check_schema(grads, "gradient")
    if len(state.m) == 0:
        state.m = ParamStore((k, np.zeros_like(v)) for k, v in params.items())
        state.v = ParamStore((k, np.zeros_like(v)) for k, v in params.items())
    else:
        params.check_schema(state.m, "optimizer state")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    step_size = state.lr / bc1

    out = ParamStore()
    for name, p in params.items():
        new = np.empty_like(p)
        _fused_update(p.reshape(-1), np.ascontiguousarray(grads[name]).reshape(-1),
                      state.m[name].reshape(-1), state.v[name].reshape(-1), new.reshape(-1),
                      b1, b2, step_size, 1.0 / bc2, state.eps)
        out[name] = new
    return out


__all__ = ["AdamState", "adam_step", "SchemaError"]
