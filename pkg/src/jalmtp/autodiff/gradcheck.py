"""Central-difference gradient checking against the recorded reverse pass."""

import numpy as np

from . import ops
from .tensor import AutodiffError, GradientTape, Tensor, backward


def grad_check(op_kind, inputs, eps=1e-6, attrs=None, wrt=None, seed=0):
    """Max relative error between analytic and central-difference gradients.

    The op output is reduced to a scalar through a fixed random projection so
    every output coordinate contributes. ``wrt`` selects input positions to
    check (default: all). The error of one coordinate is
    ``|analytic - numeric| / max(1, |analytic|)``.
    """
    if not 0.0 < eps <= 1e-3:
        raise ValueError(f"eps must lie in (0, 1e-3], got {eps}")
    attrs = dict(attrs or {})
    arrays = [np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64) for x in inputs]
    positions = list(range(len(arrays))) if wrt is None else list(wrt)
    op = ops.OPS[op_kind]

    with GradientTape() as tape:
        ts = [Tensor(a, requires_grad=i in positions) for i, a in enumerate(arrays)]
        out = ops.forward(op_kind, *ts, **attrs)
        proj = np.random.default_rng(seed).standard_normal(out.shape)
        loss = ops.sum(ops.mul(out, proj))
    if not np.all(np.isfinite(out.data)):
        raise AutodiffError(f"grad_check: non-finite forward output for {op_kind}")
    grads = backward(loss, tape, wrt=[ts[i] for i in positions])

    def f(arrs):
        y, _ = op.fwd(*arrs, **attrs)
        val = float((y * proj).sum())
        if not np.isfinite(val):
            raise AutodiffError(f"grad_check: non-finite perturbed output for {op_kind}")
        return val

    worst = 0.0
    for i in positions:
        analytic = grads[ts[i].node_id].data
        base = arrays[i]
        flat = base.reshape(-1)
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + eps
            up = f(arrays)
            flat[j] = keep - eps
            down = f(arrays)
            flat[j] = keep
            numeric = (up - down) / (2.0 * eps)
            a = analytic.reshape(-1)[j]
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    return worst


def check_function(fn, params, eps=1e-6, sample=None, seed=0):
    """Gradient check of a scalar-valued ``fn()`` w.r.t. entries of ``params``.

    ``params`` is a list of requires-grad tensors read by ``fn``; ``sample``
    limits the check to that many randomly chosen scalar coordinates.
    Returns (max relative error, list of (param index, flat index, analytic, numeric)).
    """
    with GradientTape() as tape:
        loss = fn()
    grads = backward(loss, tape, wrt=params)
    coords = [(pi, j) for pi, p in enumerate(params) for j in range(p.size)]
    if sample is not None and sample < len(coords):
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(coords), size=sample, replace=False)
        coords = [coords[k] for k in sorted(pick)]
    worst = 0.0
    rows = []
    for pi, j in coords:
        flat = params[pi].data.reshape(-1)
        keep = flat[j]
        flat[j] = keep + eps
        up = fn().item()
        flat[j] = keep - eps
        down = fn().item()
        flat[j] = keep
        numeric = (up - down) / (2.0 * eps)
        a = grads[params[pi].node_id].data.reshape(-1)[j]
        worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
        rows.append((pi, j, a, numeric))
    return worst, rows
