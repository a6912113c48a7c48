"""Differentiable op catalog.

Each op is a (forward, backward) pair over raw arrays. ``forward`` returns the
output array and whatever it needs to save; ``backward`` maps the upstream
gradient to one gradient per input (``None`` for non-differentiable inputs).
The public helpers below wrap them into :class:`Tensor` calls that record onto
the active tape.
"""

import numpy as np

from .. import kernels
from ..geometry import wrap_angle
from .tensor import AutodiffError, Tensor, active_tape


class ShapeError(AutodiffError, ValueError):
    pass


class Op:
    __slots__ = ("name", "fwd", "bwd")

    def __init__(self, name, fwd, bwd):
        self.name = name
        self.fwd = fwd
        self.bwd = bwd


OPS = {}


def _register(name, fwd, bwd):
    OPS[name] = Op(name, fwd, bwd)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def apply(op_kind, inputs, attrs=None):
    """Run ``op_kind`` and record it. Returns (output tensor, saved context)."""
    op = OPS.get(op_kind)
    if op is None:
        raise AutodiffError(f"unknown op {op_kind!r}")
    ts = tuple(_as_tensor(x) for x in inputs)
    out_data, saved = op.fwd(*[t.data for t in ts], **(attrs or {}))
    out = Tensor(out_data)
    tape = active_tape()
    if tape is not None:
        for t in ts:
            if t.requires_grad:
                out.requires_grad = True
                tape.records.append((op.bwd, ts, out, saved))
                break
    return out, saved


def forward(op_kind, *inputs, **attrs):
    """Generic entry point: ``forward("matmul", a, b)``."""
    return apply(op_kind, inputs, attrs)[0]


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(name, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{name}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# -- elementwise arithmetic ---------------------------------------------------

def _add_f(a, b):
    _check_broadcast("add", a, b)
    return a + b, (a.shape, b.shape)


def _add_b(s, g):
    return _unbroadcast(g, s[0]), _unbroadcast(g, s[1])


def _sub_f(a, b):
    _check_broadcast("sub", a, b)
    return a - b, (a.shape, b.shape)


def _sub_b(s, g):
    return _unbroadcast(g, s[0]), -_unbroadcast(g, s[1])


def _mul_f(a, b):
    _check_broadcast("mul", a, b)
    return a * b, (a, b)


def _mul_b(s, g):
    a, b = s
    return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


def _scale_f(a, c):
    return a * c, c


def _scale_b(c, g):
    return (g * c,)


_register("add", _add_f, _add_b)
_register("sub", _sub_f, _sub_b)
_register("mul", _mul_f, _mul_b)
_register("scale", _scale_f, _scale_b)


# -- linear algebra -------------------------------------------------------------

def _mm(a, b, rowwise=False):
    """2D product. ``rowwise`` uses a fixed per-element loop instead of BLAS, so each
    output row depends only on its own input row, never on batch size or position."""
    if rowwise:
        return np.einsum("ij,jk->ik", np.ascontiguousarray(a), np.ascontiguousarray(b))
    return a @ b


def _matmul_f(a, b):
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    return a @ b, (a, b)


def _matmul_b(s, g):
    a, b = s
    if b.ndim == 2 and a.ndim > 2:
        ga = g @ b.T
        gb = a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb
    ga = _unbroadcast(g @ np.swapaxes(b, -1, -2), a.shape)
    gb = _unbroadcast(np.swapaxes(a, -1, -2) @ g, b.shape)
    return ga, gb


def _linear_f(x, w, b, rowwise=False, relu=False):
    """x W + b over the last axis; ``relu`` fuses a rectifier onto the output."""
    if w.ndim != 2 or x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"linear: x {x.shape}, W {w.shape}, b {b.shape}")
    out = _mm(x.reshape(-1, x.shape[-1]), w, rowwise) + b
    out = out.reshape(x.shape[:-1] + (w.shape[1],))
    if relu:
        np.maximum(out, 0.0, out=out)
        return out, (x, w, out > 0)
    return out, (x, w, None)


def _linear_b(s, g):
    x, w, active = s
    if active is not None:
        g = g * active
    g2 = g.reshape(-1, g.shape[-1])
    gw = x.reshape(-1, x.shape[-1]).T @ g2
    return g @ w.T, gw, g2.sum(axis=0)


_register("matmul", _matmul_f, _matmul_b)
_register("linear", _linear_f, _linear_b)


# -- shape manipulation -----------------------------------------------------------

def _concat_f(*xs, axis=-1):
    if not xs:
        raise ShapeError("concat: no inputs")
    nd = xs[0].ndim
    ax = axis % nd
    for x in xs[1:]:
        if x.ndim != nd or any(x.shape[i] != xs[0].shape[i] for i in range(nd) if i != ax):
            raise ShapeError(f"concat: mismatched shapes {[x.shape for x in xs]} on axis {axis}")
    sizes = [x.shape[ax] for x in xs]
    return np.concatenate(xs, axis=ax), (ax, np.cumsum(sizes)[:-1])


def _concat_b(s, g):
    ax, cuts = s
    return tuple(np.split(g, cuts, axis=ax))


def _reshape_f(x, shape):
    try:
        return x.reshape(shape), x.shape
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {x.shape} to {shape}") from None


def _reshape_b(s, g):
    return (g.reshape(s),)


def _is_advanced(idx):
    if isinstance(idx, tuple):
        return any(isinstance(i, (np.ndarray, list)) for i in idx)
    return isinstance(idx, (np.ndarray, list))


def _index_f(x, idx):
    return x[idx], (x.shape, idx)


def _index_b(s, g):
    shape, idx = s
    z = np.zeros(shape)
    if _is_advanced(idx):
        np.add.at(z, idx, g)
    else:
        z[idx] = g
    return (z,)


def _segment_sum_f(x, ids, n):
    ids = np.asarray(ids, dtype=np.int64)
    if ids.shape != (x.shape[0],):
        raise ShapeError(f"segment_sum: ids {ids.shape} for rows {x.shape}")
    out = np.zeros((n,) + x.shape[1:])
    np.add.at(out, ids, x)
    return out, ids


def _segment_sum_b(ids, g):
    return (g[ids],)


_register("concat", _concat_f, _concat_b)
_register("reshape", _reshape_f, _reshape_b)
_register("index", _index_f, _index_b)
_register("segment_sum", _segment_sum_f, _segment_sum_b)


# -- nonlinearities ---------------------------------------------------------------

def _tanh_f(x):
    y = np.tanh(x)
    return y, y


def _tanh_b(y, g):
    return (g * (1.0 - y * y),)


def _sigmoid_f(x):
    with np.errstate(over="ignore"):
        y = 1.0 / (1.0 + np.exp(-x))
    return y, y


def _sigmoid_b(y, g):
    return (g * y * (1.0 - y),)


def _relu_f(x):
    m = x > 0
    return np.where(m, x, 0.0), m


def _relu_b(m, g):
    return (np.where(m, g, 0.0),)


def _exp_f(x):
    y = np.exp(x)
    return y, y


def _exp_b(y, g):
    return (g * y,)


def _log_f(x):
    if np.any(x <= 0):
        raise AutodiffError("log: non-positive input")
    return np.log(x), x


def _log_b(x, g):
    return (g / x,)


_register("tanh", _tanh_f, _tanh_b)
_register("sigmoid", _sigmoid_f, _sigmoid_b)
_register("relu", _relu_f, _relu_b)
_register("exp", _exp_f, _exp_b)
_register("log", _log_f, _log_b)


# -- reductions ---------------------------------------------------------------------

def _sum_f(x, axis=None, keepdims=False):
    return x.sum(axis=axis, keepdims=keepdims), (x.shape, axis, keepdims)


def _sum_b(s, g):
    shape, axis, keepdims = s
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return (np.broadcast_to(g, shape).copy(),)


def _mean_f(x, axis=None, keepdims=False):
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return x.mean(axis=axis, keepdims=keepdims), (x.shape, axis, keepdims, n)


def _mean_b(s, g):
    shape, axis, keepdims, n = s
    return (_sum_b((shape, axis, keepdims), g)[0] / n,)


def _min_f(x, axis=-1):
    if x.shape[axis] == 0:
        raise ShapeError(f"min: empty axis {axis} in shape {x.shape}")
    am = np.argmin(x, axis=axis)
    return np.take_along_axis(x, np.expand_dims(am, axis), axis).squeeze(axis), (x.shape, axis, am)


def _min_b(s, g):
    shape, axis, am = s
    z = np.zeros(shape)
    np.put_along_axis(z, np.expand_dims(am, axis), np.expand_dims(g, axis), axis)
    return (z,)


_register("sum", _sum_f, _sum_b)
_register("mean", _mean_f, _mean_b)
_register("min", _min_f, _min_b)


# -- softmax family -------------------------------------------------------------------

def _softmax_f(x, axis=-1, mask=None):
    if x.ndim == 0 or x.shape[axis] == 0:
        raise ShapeError(f"softmax: empty axis {axis} in shape {x.shape}")
    if mask is not None:
        mask = np.broadcast_to(mask, x.shape)
        if not np.all(mask.any(axis=axis)):
            raise ShapeError("softmax: a slice is fully masked")
        xm = np.where(mask, x, -np.inf)
    else:
        xm = x
    top = xm.max(axis=axis, keepdims=True)
    e = np.exp(xm - top)
    y = e / e.sum(axis=axis, keepdims=True)
    return y, (y, axis)


def _softmax_b(s, g):
    y, axis = s
    return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)


def _cross_entropy_f(p, labels, axis=-1):
    if p.shape != labels.shape:
        raise ShapeError(f"cross_entropy: probs {p.shape} vs labels {labels.shape}")
    if np.any(p[labels != 0] <= 0):
        raise AutodiffError("cross_entropy: zero probability on a labelled class")
    safe = np.where(labels != 0, p, 1.0)
    return -(labels * np.log(safe)).sum(axis=axis), (safe, labels, axis)


def _cross_entropy_b(s, g):
    safe, labels, axis = s
    return -labels / safe * np.expand_dims(g, axis), None


def _softmax_xent_f(z, labels, mask=None):
    """Row-wise -sum(labels * log softmax(z)) over the last axis."""
    if z.shape != labels.shape:
        raise ShapeError(f"softmax_cross_entropy: logits {z.shape} vs labels {labels.shape}")
    if mask is not None:
        mask = np.broadcast_to(mask, z.shape)
        zm = np.where(mask, z, -np.inf)
    else:
        zm = z
    top = zm.max(axis=-1, keepdims=True)
    e = np.exp(zm - top)
    tot = e.sum(axis=-1, keepdims=True)
    logp = np.where(np.isfinite(zm), zm - top - np.log(tot), 0.0)
    loss = -(labels * logp).sum(axis=-1)
    return loss, (e / tot, labels)


def _softmax_xent_b(s, g):
    y, labels = s
    g = g[..., None]
    return g * (y * labels.sum(axis=-1, keepdims=True) - labels), None


_register("softmax", _softmax_f, _softmax_b)
_register("cross_entropy", _cross_entropy_f, _cross_entropy_b)
_register("softmax_cross_entropy", _softmax_xent_f, _softmax_xent_b)


# -- distances ------------------------------------------------------------------------

def _l1_f(x, y):
    _check_broadcast("l1", x, y)
    d = x - y
    return np.abs(d).sum(), (np.sign(d), x.shape, y.shape)


def _l1_b(s, g):
    sg, sx, sy = s
    return _unbroadcast(g * sg, sx), _unbroadcast(-g * sg, sy)


def _norm_f(x, axis=-1):
    n = np.sqrt((x * x).sum(axis=axis))
    return n, (x, n, axis)


def _norm_b(s, g):
    x, n, axis = s
    safe = np.where(n > 0, n, 1.0)
    scale = np.where(n > 0, g / safe, 0.0)
    return (x * np.expand_dims(scale, axis),)


_register("l1", _l1_f, _l1_b)
_register("norm", _norm_f, _norm_b)


# -- agent geometry ------------------------------------------------------------------------

def _heading_f(step, prev, min_step=1e-6):
    """Direction of ``step`` (R, 2); rows shorter than ``min_step`` keep ``prev`` (R,)."""
    r2 = step[:, 0] ** 2 + step[:, 1] ** 2
    moving = r2 >= min_step * min_step
    out = np.where(moving, np.arctan2(step[:, 1], step[:, 0]), prev)
    return out, (step, np.where(moving, r2, 1.0), moving)


def _heading_b(s, g):
    step, r2, moving = s
    gm = np.where(moving, g, 0.0) / r2
    gs = np.stack([-step[:, 1] * gm, step[:, 0] * gm], axis=-1)
    return gs, np.where(moving, 0.0, g)


def _window_geometry_f(pos, heading, nodes, dirs, dist_scale=1.0):
    """Per window node: (distance to ``pos`` times ``dist_scale``, wrapped lane direction minus heading).

    pos (R, 2), heading (R,), nodes (R, W, 2), dirs (R, W) -> (R, W, 2).
    """
    diff = nodes - pos[:, None, :]
    dist = np.sqrt((diff * diff).sum(-1))
    dtheta = np.atleast_2d(wrap_angle(dirs - heading[:, None]))
    return np.stack([dist * dist_scale, dtheta], axis=-1), (diff, dist, dist_scale)


def _window_geometry_b(s, g):
    diff, dist, dist_scale = s
    coef = np.where(dist > 0, g[..., 0] * dist_scale / np.where(dist > 0, dist, 1.0), 0.0)
    g_pos = -(diff * coef[..., None]).sum(axis=1)
    return g_pos, -g[..., 1].sum(axis=1), None, None


_register("heading", _heading_f, _heading_b)
_register("window_geometry", _window_geometry_f, _window_geometry_b)


# -- convolution and recurrent cell ------------------------------------------------------

def _conv1d_f(x, w, b, rowwise=False):
    """Same-padded 1D convolution. x (B, T, Cin), w (k, Cin, Cout), b (Cout,)."""
    if x.ndim != 3 or w.ndim != 3 or w.shape[1] != x.shape[2] or b.shape != (w.shape[2],):
        raise ShapeError(f"conv1d: x {x.shape}, W {w.shape}, b {b.shape}")
    k = w.shape[0]
    if k % 2 != 1:
        raise ShapeError(f"conv1d: kernel size must be odd, got {k}")
    bsz, t, cin = x.shape
    p = k // 2
    xp = np.zeros((bsz, t + 2 * p, cin))
    xp[:, p:p + t] = x
    cols = np.stack([xp[:, i:i + t] for i in range(k)], axis=2).reshape(bsz * t, k * cin)
    out = _mm(cols, w.reshape(k * cin, -1), rowwise) + b
    return out.reshape(bsz, t, -1), (cols, w, x.shape)


def _conv1d_b(s, g):
    cols, w, xshape = s
    bsz, t, cin = xshape
    k = w.shape[0]
    p = k // 2
    g2 = g.reshape(bsz * t, -1)
    gw = (cols.T @ g2).reshape(w.shape)
    gcols = (g2 @ w.reshape(k * cin, -1).T).reshape(bsz, t, k, cin)
    gxp = np.zeros((bsz, t + 2 * p, cin))
    for i in range(k):
        gxp[:, i:i + t] += gcols[:, :, i]
    return gxp[:, p:p + t], gw, g2.sum(axis=0)


def _gru_f(x, h, wx, wh, bx, bh, rowwise=False):
    """Reset/update/candidate GRU cell; weights laid out [r | z | n] along columns."""
    d = h.shape[-1]
    if wx.shape != (x.shape[-1], 3 * d) or wh.shape != (d, 3 * d) or bx.shape != (3 * d,) \
            or bh.shape != (3 * d,) or x.shape[0] != h.shape[0]:
        raise ShapeError(
            f"gru_cell: x {x.shape}, h {h.shape}, Wx {wx.shape}, Wh {wh.shape}, "
            f"bx {bx.shape}, bh {bh.shape}")
    gx = _mm(x, wx, rowwise) + bx
    gh = np.ascontiguousarray(_mm(h, wh, rowwise) + bh)
    h = np.ascontiguousarray(h)
    h_new, r, z, n = kernels.gru_gates_forward(np.ascontiguousarray(gx), gh, h)
    return h_new, (x, h, wx, wh, r, z, n, gh[:, 2 * d:])


def _gru_b(s, g):
    x, h, wx, wh, r, z, n, gh_n = s
    dgx, dgh, dh = kernels.gru_gates_backward(np.ascontiguousarray(g), h, r, z, n, gh_n)
    return (dgx @ wx.T, dh + dgh @ wh.T, x.T @ dgx, h.T @ dgh, dgx.sum(axis=0), dgh.sum(axis=0))


def _attention_f(q, k, v, mask):
    """One query per row over a masked window: q (B, d), k/v (B, W, d), mask (B, W)."""
    mask = np.asarray(mask, dtype=bool)
    if q.ndim != 2 or k.shape != v.shape or k.shape[:1] + k.shape[2:] != q.shape \
            or mask.shape != k.shape[:2]:
        raise ShapeError(f"attention: q {q.shape}, k {k.shape}, v {v.shape}, mask {mask.shape}")
    if k.shape[1] == 0 or not np.all(mask.any(axis=1)):
        raise ShapeError("attention: empty window")
    q = np.ascontiguousarray(q)
    k = np.ascontiguousarray(k)
    v = np.ascontiguousarray(v)
    out, w = kernels.attention_forward(q, k, v, mask)
    return out, (q, k, v, w)


def _attention_b(s, g):
    q, k, v, w = s
    gq, gk, gv = kernels.attention_backward(np.ascontiguousarray(g), q, k, v, w)
    return gq, gk, gv


_register("conv1d", _conv1d_f, _conv1d_b)
_register("gru_cell", _gru_f, _gru_b)
_register("attention", _attention_f, _attention_b)


# -- public helpers ------------------------------------------------------------------------

def add(a, b):
    return apply("add", (a, b))[0]


def sub(a, b):
    return apply("sub", (a, b))[0]


def mul(a, b):
    return apply("mul", (a, b))[0]


def scale(a, c):
    return apply("scale", (a,), {"c": float(c)})[0]


def matmul(a, b):
    return apply("matmul", (a, b))[0]


def linear(x, w, b, rowwise=False, relu=False):
    return apply("linear", (x, w, b), {"rowwise": rowwise, "relu": relu})[0]


def concat(xs, axis=-1):
    return apply("concat", tuple(xs), {"axis": axis})[0]


def stack(xs, axis=0):
    xs = [_as_tensor(x) for x in xs]
    ax = axis % (xs[0].ndim + 1)
    expanded = [reshape(x, x.shape[:ax] + (1,) + x.shape[ax:]) for x in xs]
    return concat(expanded, axis=ax)


def reshape(x, shape):
    return apply("reshape", (x,), {"shape": tuple(shape)})[0]


def index(x, idx):
    return apply("index", (x,), {"idx": idx})[0]


def segment_sum(x, ids, n):
    return apply("segment_sum", (x,), {"ids": ids, "n": int(n)})[0]


def tanh(x):
    return apply("tanh", (x,))[0]


def sigmoid(x):
    return apply("sigmoid", (x,))[0]


def relu(x):
    return apply("relu", (x,))[0]


def exp(x):
    return apply("exp", (x,))[0]


def log(x):
    return apply("log", (x,))[0]


def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy naming
    return apply("sum", (x,), {"axis": axis, "keepdims": keepdims})[0]


def mean(x, axis=None, keepdims=False):
    return apply("mean", (x,), {"axis": axis, "keepdims": keepdims})[0]


def min(x, axis=-1):  # noqa: A001
    return apply("min", (x,), {"axis": axis})[0]


def softmax(x, axis=-1, mask=None):
    return apply("softmax", (x,), {"axis": axis, "mask": mask})[0]


def cross_entropy(probs, labels, axis=-1):
    return apply("cross_entropy", (probs, labels), {"axis": axis})[0]


def softmax_cross_entropy(logits, labels, mask=None):
    return apply("softmax_cross_entropy", (logits, labels), {"mask": mask})[0]


def l1(x, y):
    return apply("l1", (x, y))[0]


def norm(x, axis=-1):
    return apply("norm", (x,), {"axis": axis})[0]


def heading(step, prev, min_step=1e-6):
    return apply("heading", (step, prev), {"min_step": min_step})[0]


def window_geometry(pos, heading, nodes, dirs, dist_scale=1.0):
    return apply("window_geometry", (pos, heading, nodes, dirs), {"dist_scale": dist_scale})[0]


def conv1d(x, w, b, rowwise=False):
    return apply("conv1d", (x, w, b), {"rowwise": rowwise})[0]


def gru_cell(x, h, wx, wh, bx, bh, rowwise=False):
    return apply("gru_cell", (x, h, wx, wh, bx, bh), {"rowwise": rowwise})[0]


def attention(q, k, v, mask, return_weights=False):
    out, saved = apply("attention", (q, k, v), {"mask": mask})
    return (out, saved[3]) if return_weights else out
