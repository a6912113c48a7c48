"""Social-to-lane fusion.

Social agents are attached to the lane nodes their constant-acceleration
rollout passes within ``threshold`` meters of. For node h,

    fused_h = phi_res(l_h + sum_j phi_agg(l_h || dist(V_h - V_j) || S_j))

then a two-layer residual convolution passes messages along the node axis.

Per-pair work uses row-independent arithmetic and pairs are ordered by
(lane, node, agent content), so every fused node is bit-identical under any
permutation of the agents and unaffected by agents not attached to its lane.
"""

from typing import NamedTuple

import numpy as np

from .. import kernels
from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..geometry import const_accel_rollout
from .encoders import POS_SCALE
from .params import MLP, Conv1d

THRESHOLD = 7.5


class RelatednessMap(NamedTuple):
    related: np.ndarray   # (H, M) bool
    min_dist: np.ndarray  # (H, M) meters


class PairSet(NamedTuple):
    """Flat (lane, node, agent) attachments with the node-minus-agent offset."""

    lane: np.ndarray
    node: np.ndarray
    agent: np.ndarray
    offset: np.ndarray  # (P, 2)

    @classmethod
    def empty(cls):
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), z.copy(), np.zeros((0, 2)))


def rollouts(social_pasts, horizon):
    """(M, Tp, 2) -> (M, horizon, 2) constant-acceleration rollouts."""
    social_pasts = np.asarray(social_pasts, dtype=np.float64)
    out = np.zeros((len(social_pasts), horizon, 2))
    for j, past in enumerate(social_pasts):
        out[j] = const_accel_rollout(past, horizon).points
    return out


def relatedness(nodes, agent_rollouts, threshold=THRESHOLD):
    """Node/agent relation: related iff some rollout point lies strictly within ``threshold``."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    if len(agent_rollouts) == 0:
        return RelatednessMap(np.zeros((len(nodes), 0), dtype=bool), np.zeros((len(nodes), 0)))
    dist = kernels.rollout_node_min_dist(nodes, np.ascontiguousarray(agent_rollouts, dtype=np.float64))
    return RelatednessMap(dist < threshold, dist)


def agent_order(social_pasts):
    """Rank of each agent under a content-only ordering (lexicographic on its coordinates)."""
    flat = np.asarray(social_pasts, dtype=np.float64).reshape(len(social_pasts), -1)
    if len(flat) == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort(flat.T[::-1])
    rank = np.empty(len(flat), dtype=np.int64)
    rank[order] = np.arange(len(flat))
    return rank


def build_pairs(lanes, social_pasts, threshold=THRESHOLD, horizon=30, lane_offset=0, agent_offset=0):
    """Attachments for one scene. ``lanes`` (N, H, 2), ``social_pasts`` (M, Tp, 2), agent frame.

    Offsets shift lane/agent indices so several scenes can share one flat batch.
    """
    m = len(social_pasts)
    if m == 0 or len(lanes) == 0:
        return PairSet.empty()
    ro = rollouts(social_pasts, horizon)
    rank = agent_order(social_pasts)
    current = np.asarray(social_pasts)[:, -1]
    rows = []
    for i, nodes in enumerate(lanes):
        rel = relatedness(nodes, ro, threshold).related
        h, j = np.nonzero(rel)
        if len(h):
            rows.append(np.stack([np.full(len(h), i), h, rank[j], j], axis=1))
    if not rows:
        return PairSet.empty()
    r = np.concatenate(rows)
    r = r[np.lexsort((r[:, 2], r[:, 1], r[:, 0]))]
    lane, node, agent = r[:, 0], r[:, 1], r[:, 3]
    offset = np.asarray(lanes)[lane, node] - current[agent]
    return PairSet(lane + lane_offset, node, agent + agent_offset, offset)


def concat_pairs(sets):
    if not sets:
        return PairSet.empty()
    return PairSet(*[np.concatenate([getattr(s, f) for s in sets]) for f in PairSet._fields])


class S2L:
    def __init__(self, store, d):
        dd = d // 4
        self.dist = MLP(store, "s2l.dist", [2, dd, dd])
        self.agg = MLP(store, "s2l.agg", [2 * d + dd, d, d])
        self.res = MLP(store, "s2l.res", [d, d, d])
        self.mp1 = Conv1d(store, "s2l.mp1", d, d, 3)
        self.mp2 = Conv1d(store, "s2l.mp2", d, d, 3)
        self.d = d

    def fuse(self, lane_feats, social, pairs):
        """(L, H, d) lane features + (M, d) social features -> (L, H, d) fused nodes."""
        n_lane, h, d = lane_feats.shape
        x = lane_feats
        if len(pairs.lane):
            l_pair = ops.index(lane_feats, (pairs.lane, pairs.node))
            dist = self.dist(Tensor(pairs.offset * POS_SCALE), rowwise=True)
            s_pair = ops.index(social, pairs.agent)
            msg = self.agg(ops.concat([l_pair, dist, s_pair], axis=-1), rowwise=True)
            agg = ops.segment_sum(msg, pairs.lane * h + pairs.node, n_lane * h)
            x = ops.add(x, ops.reshape(agg, (n_lane, h, d)))
        return self.res(x)

    def message_pass(self, fused):
        """Residual two-layer kernel-3 convolution along the node axis."""
        return ops.add(fused, self.mp2(ops.relu(self.mp1(fused))))

    def __call__(self, lane_feats, social, pairs):
        return self.message_pass(self.fuse(lane_feats, social, pairs))


def s2l_fuse(module, lane_feats, social, rel, positions):
    """Single-lane form: ``lane_feats`` (H, d), ``social`` (M, d), ``rel`` a RelatednessMap,
    ``positions`` = (lane nodes (H, 2), agent current positions (M, 2))."""
    nodes, agent_pos = positions
    h, j = np.nonzero(rel.related)
    if len(h):
        rank = agent_order(np.asarray(agent_pos)[:, None, :])
        o = np.lexsort((rank[j], h))
        h, j = h[o], j[o]
    pairs = PairSet(np.zeros(len(h), dtype=np.int64), h, j, np.asarray(nodes)[h] - np.asarray(agent_pos)[j])
    lf = ops.reshape(lane_feats, (1,) + tuple(lane_feats.shape))
    return ops.reshape(module.fuse(lf, social, pairs), lane_feats.shape)


def node_message_pass(module, fused):
    """(H, d) -> (H, d) instance-lane features."""
    x = ops.reshape(fused, (1,) + tuple(fused.shape))
    return ops.reshape(module.message_pass(x), fused.shape)
