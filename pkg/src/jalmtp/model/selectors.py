"""Lane and trajectory selectors, top-K identification, self-supervised labels and the loss."""

import math
from typing import NamedTuple

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from .params import MLP


class ScoreSet(NamedTuple):
    lane_scores: np.ndarray   # (N,) probabilities over lanes
    traj_scores: np.ndarray   # (N, K) probabilities over heads, per lane
    combined: np.ndarray      # (N, K)
    final_probs: np.ndarray   # (K',) probabilities of the picked trajectories


class Picked(NamedTuple):
    lane: np.ndarray    # (K',) lane index per pick
    head: np.ndarray    # (K',) head index per pick
    probs: np.ndarray   # (K',) renormalized
    short: bool         # fewer candidates than requested


class LabelSet(NamedTuple):
    lane: np.ndarray   # (N,)
    traj: np.ndarray   # (K,)


class LaneSelector:
    def __init__(self, store, d):
        self.mlp = MLP(store, "sel.lane", [d, d, 1])

    def logits(self, h):
        """(L, d) -> (L,) unnormalized lane scores."""
        return ops.reshape(self.mlp(h), (h.shape[0],))


class TrajSelector:
    def __init__(self, store, d, tf):
        self.mlp = MLP(store, "sel.traj", [2 * tf + d, d, 1])

    def logits(self, offsets, h):
        """offsets (R, K, Tf, 2) tensor, h (R, d) -> (R, K)."""
        r, k = offsets.shape[:2]
        flat = ops.reshape(offsets, (r, k, -1))
        hk = ops.index(ops.reshape(h, (r, 1, h.shape[1])), (slice(None), np.zeros(k, dtype=np.int64)))
        return ops.reshape(self.mlp(ops.concat([flat, hk], axis=-1)), (r, k))


def lane_select(logits):
    """Softmax over the N lanes of one scene."""
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def traj_select(logits):
    """Softmax over the K heads of each lane: (N, K) -> (N, K)."""
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def combine_and_pick(lane_probs, traj_probs, k):
    """Global top-``k`` of lane[i] * traj[i, j]; ties go to the lower lane, then the lower head."""
    lane_probs = np.asarray(lane_probs, dtype=np.float64)
    traj_probs = np.asarray(traj_probs, dtype=np.float64)
    combined = lane_probs[:, None] * traj_probs
    n, kk = combined.shape
    lane_ix, head_ix = np.divmod(np.arange(n * kk), kk)
    order = np.lexsort((head_ix, lane_ix, -combined.ravel()))
    short = n * kk < k
    take = order[:min(k, n * kk)]
    picked = combined.ravel()[take]
    total = picked.sum()
    probs = picked / total if total > 0 else np.full(len(picked), 1.0 / len(picked))
    return Picked(lane_ix[take], head_ix[take], probs, bool(short)), combined


def scores(lane_logits, traj_logits, k):
    """Selector logits of one scene -> (ScoreSet, Picked)."""
    lp, tp = lane_select(lane_logits), traj_select(traj_logits)
    pick, combined = combine_and_pick(lp, tp, k)
    return ScoreSet(lp, tp, combined, pick.probs), pick


def lane_distance(nodes, gt):
    """D1 = sum_t t * min_h ||y_t - l_h||, t = 1..Tf."""
    gt = np.asarray(gt, dtype=np.float64)
    diff = gt[:, None, :] - np.asarray(nodes)[None, :, :]
    d = np.sqrt((diff ** 2).sum(-1)).min(axis=1)
    return float((np.arange(1, len(gt) + 1) * d).sum())


def traj_distance(traj, gt):
    """D2 = sum_t ||y_t - yhat_t||."""
    diff = np.asarray(traj) - np.asarray(gt)
    return float(np.sqrt((diff ** 2).sum(-1)).sum())


def _softmax_neg(d):
    d = np.asarray(d, dtype=np.float64)
    e = np.exp(-(d - d.min()))
    return e / e.sum()


def lane_labels(proposal_nodes, gt):
    return _softmax_neg([lane_distance(n, gt) for n in proposal_nodes])


def traj_labels(trajs, gt):
    return _softmax_neg([traj_distance(t, gt) for t in trajs])


def make_labels(proposal_nodes, trajs, gt):
    """Lane labels softmax(-D1) over proposals and trajectory labels softmax(-D2) over ``trajs``."""
    return LabelSet(lane_labels(proposal_nodes, gt), traj_labels(trajs, gt))


def entropy(p):
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def ambiguous(lane_label):
    """True when the lane labels carry no preference: N >= 2 and entropy > ln N - 0.01."""
    n = len(lane_label)
    return n >= 2 and entropy(lane_label) > math.log(n) - 0.01


def regression_loss(trajs, gt):
    """Winner-take-all: min over heads of the mean per-step Euclidean error.

    trajs (B, K, Tf, 2) tensor, gt (B, Tf, 2) array -> (B,) tensor.
    """
    err = ops.norm(ops.sub(trajs, Tensor(np.asarray(gt)[:, None])), axis=-1)
    return ops.min(ops.mean(err, axis=-1), axis=-1)


def total_loss(trajs, gt, lane_logits, lane_lbl, lane_mask, traj_logits, traj_lbl, lam1=1.0, lam2=1.0):
    """L_reg + lam1 * CE(lane) + lam2 * CE(traj), each averaged over the batch.

    lane_logits (B, Nmax) with ``lane_mask`` marking real lanes; traj_logits (B, K)
    for the decoded lane. Returns (total, parts dict of floats).
    """
    reg = ops.mean(regression_loss(trajs, gt))
    ce_lane = ops.mean(ops.softmax_cross_entropy(lane_logits, lane_lbl, mask=lane_mask))
    ce_traj = ops.mean(ops.softmax_cross_entropy(traj_logits, traj_lbl))
    total = ops.add(reg, ops.add(ops.scale(ce_lane, lam1), ops.scale(ce_traj, lam2)))
    return total, {"reg": reg.item(), "lane_ce": ce_lane.item(), "traj_ce": ce_traj.item()}
