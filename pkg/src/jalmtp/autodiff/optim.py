"""Adaptive-moment optimizer over named parameter tensors."""

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class OptimizerState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(params, grads, state):
    """Apply one bias-corrected Adam update in place.

    ``params`` maps name -> Tensor and ``grads`` maps the same names -> array
    (or Tensor). Returns ``(params, state)``.
    """
    missing = [name for name in params if name not in grads]
    if missing:
        raise KeyError(f"optimizer_step: no gradient for parameter(s) {missing[:5]}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads[name]
        g = g.data if isinstance(g, Tensor) else np.asarray(g)
        if g.shape != p.data.shape:
            raise ValueError(f"optimizer_step: gradient shape {g.shape} != {p.data.shape} for {name}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if state.lr != 0.0:
            p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
