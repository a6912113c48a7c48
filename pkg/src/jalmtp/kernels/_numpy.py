"""Pure-numpy kernels. Reference behaviour for the compiled twin in ``_ckernels``."""

import numpy as np


def nearest_nodes(nodes, points):
    """Nearest node per row.

    nodes: (B, H, 2), points: (B, 2). Returns (index int64 (B,), distance (B,)).
    Ties resolve to the smallest index (``argmin`` returns the first hit).
    """
    diff = nodes - points[:, None, :]
    d2 = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1]
    idx = np.argmin(d2, axis=1)
    dist = np.sqrt(d2[np.arange(len(idx)), idx])
    return idx.astype(np.int64), dist


def rollout_node_min_dist(nodes, rollouts):
    """For every (node h, agent j) the min distance over agent j's rollout points.

    nodes: (H, 2), rollouts: (M, T, 2). Returns (H, M).
    """
    if rollouts.shape[0] == 0:
        return np.zeros((nodes.shape[0], 0))
    diff = nodes[:, None, None, :] - rollouts[None, :, :, :]
    d2 = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1]
    return np.sqrt(d2.min(axis=2))


def attention_forward(q, k, v, mask):
    """Masked single-head scaled dot-product attention, one query per row.

    q: (B, d); k, v: (B, W, d); mask: (B, W) bool. Masked slots get weight 0.
    """
    d = q.shape[1]
    scores = np.einsum("bwd,bd->bw", k, q) / np.sqrt(d)
    scores = np.where(mask, scores, -np.inf)
    top = scores.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(scores - top), 0.0)
    w = e / e.sum(axis=1, keepdims=True)
    out = np.einsum("bw,bwd->bd", w, v)
    return out, w


def attention_backward(g, q, k, v, w):
    d = q.shape[1]
    gv = w[:, :, None] * g[:, None, :]
    gw = np.einsum("bwd,bd->bw", v, g)
    gs = w * (gw - (w * gw).sum(axis=1, keepdims=True))
    gs = gs / np.sqrt(d)
    gq = np.einsum("bw,bwd->bd", gs, k)
    gk = gs[:, :, None] * q[:, None, :]
    return gq, gk, gv


def _sigmoid(x):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def gru_gates_forward(gx, gh, h):
    """Gate arithmetic of a GRU cell given both pre-activation blocks.

    gx = x Wx + bx and gh = h Wh + bh, each (B, 3d) laid out [reset | update | candidate].
    Returns (h_new, r, z, n).
    """
    d = h.shape[1]
    r = _sigmoid(gx[:, :d] + gh[:, :d])
    z = _sigmoid(gx[:, d:2 * d] + gh[:, d:2 * d])
    n = np.tanh(gx[:, 2 * d:] + r * gh[:, 2 * d:])
    h_new = (1.0 - z) * n + z * h
    return h_new, r, z, n


def gru_gates_backward(g, h, r, z, n, gh_n):
    """Returns (d gx, d gh, direct d h) for upstream gradient ``g`` on h_new."""
    dn = g * (1.0 - z) * (1.0 - n * n)
    dz = g * (h - n) * z * (1.0 - z)
    dr = dn * gh_n * r * (1.0 - r)
    dgx = np.concatenate([dr, dz, dn], axis=1)
    dgh = np.concatenate([dr, dz, dn * r], axis=1)
    return dgx, dgh, g * z
