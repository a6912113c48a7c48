"""Recurrent lane attention.

Every step a waypoint GRU proposes a look-ahead point b_t. The attention window
on the lane runs from the node nearest the current position (A) to the node
nearest b_t (B), swapped when B < A. Window nodes are encoded together with
their distance to the agent and their heading offset, attended by the top
layer of the main GRU stack (residual add), and the main stack then advances.

All routines are batched over rows. A row is one (lane, head) rollout; each
row reads the lane given by ``row_lane``.
"""

from typing import NamedTuple

import numpy as np

from .. import kernels
from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..geometry import wrap_angle
from .encoders import POS_SCALE
from .params import MLP, GRUStack, Linear

WAYPOINT_SCALE = 10.0
# decoded steps shorter than this keep the previous heading (also bounds d heading / d offset)
MIN_STEP = 0.05


class RlaState(NamedTuple):
    wp: list      # waypoint-GRU hidden, one (R, d) tensor per layer
    nxt: list     # main GRU hidden, one (R, d) tensor per layer
    pos: Tensor   # (R, 2) current position a_{t-1}
    heading: Tensor  # (R,) current orientation, radians


class AttentionWindow(NamedTuple):
    lo: np.ndarray     # (R,) A after the swap rule
    hi: np.ndarray     # (R,) B after the swap rule
    idx: np.ndarray    # (R, W) clipped node indices
    mask: np.ndarray   # (R, W) True inside [lo, hi]
    dist: np.ndarray   # (R, W) node distance to the agent
    dtheta: np.ndarray  # (R, W) lane direction minus agent heading


class LaneContext(NamedTuple):
    """Per-lane inputs shared by every row that reads the lane."""

    nodes: np.ndarray     # (L, H, 2)
    dirs: np.ndarray      # (L, H)
    feats: Tensor         # (L, H, d) instance-lane features
    proj: Tensor          # (L, H, d) lane half of the window encoder's first layer


class StepTrace(NamedTuple):
    waypoint: np.ndarray
    window: AttentionWindow
    weights: np.ndarray


def window_span(nodes, a_prev, b):
    """(A, B, clipped indices (R, W), in-window mask) for rows of ``nodes`` (R, H, 2)."""
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    ia, _ = kernels.nearest_nodes(nodes, np.ascontiguousarray(a_prev, dtype=np.float64))
    ib, _ = kernels.nearest_nodes(nodes, np.ascontiguousarray(b, dtype=np.float64))
    lo, hi = np.minimum(ia, ib), np.maximum(ia, ib)
    width = int((hi - lo).max()) + 1
    idx = lo[:, None] + np.arange(width)[None, :]
    mask = idx <= hi[:, None]
    return lo, hi, np.minimum(idx, nodes.shape[1] - 1), mask


def window_from(nodes, a_prev, b, heading, dirs):
    """Attention windows for rows of ``nodes`` (R, H, 2) given positions and waypoints (R, 2)."""
    lo, hi, idx, mask = window_span(nodes, a_prev, b)
    rows = np.arange(len(nodes))[:, None]
    a = np.asarray(a_prev, dtype=np.float64)
    win_nodes = nodes[rows, idx]
    dist = np.hypot(win_nodes[..., 0] - a[:, None, 0], win_nodes[..., 1] - a[:, None, 1])
    dtheta = wrap_angle(dirs[rows, idx] - np.asarray(heading)[:, None])
    return AttentionWindow(lo, hi, idx, mask, dist, np.atleast_2d(dtheta))


class RLA:
    def __init__(self, store, d, k_heads):
        dr = d // 4
        self.d = d
        self.k = k_heads
        self.wp_gru = GRUStack(store, "rla.wp_gru", 2, d)
        self.wp_head = MLP(store, "rla.wp_head", [d, d, 2])
        self.gru = GRUStack(store, "rla.gru", 2 + d, d)
        de = d // 2
        self.rel = MLP(store, "rla.rel", [2, dr, de])
        self.e_lane = Linear(store, "rla.e_lane", d, de)
        self.wq = Linear(store, "rla.wq", d, d)
        self.wkv = Linear(store, "rla.wkv", de, 2 * d)
        self.token = store.new("rla.token", (1, d), d)
        self.pred = MLP(store, "rla.pred", [d, d, 2 * k_heads])

    # -- pieces -------------------------------------------------------------------

    def lane_context(self, nodes, dirs, feats):
        return LaneContext(np.ascontiguousarray(nodes, dtype=np.float64), np.asarray(dirs), feats,
                           self.e_lane(feats))

    def init_state(self, pos, heading):
        rows = len(pos)
        return RlaState(self.wp_gru.zeros(rows), self.gru.zeros(rows), Tensor(pos), Tensor(heading))

    def waypoint_step(self, state, pos_in=None):
        """Advance the waypoint GRU on a_{t-1}; returns (waypoint tensor (R, 2), new waypoint hidden)."""
        pos_in = ops.scale(state.pos, POS_SCALE) if pos_in is None else pos_in
        wp = self.wp_gru.step(pos_in, state.wp)
        offset = ops.scale(self.wp_head(wp[-1]), WAYPOINT_SCALE)
        b = ops.add(state.pos, offset)
        return b, wp

    def window_keys(self, ctx, row_lane, idx, rel_in):
        """K, V for the window nodes of each row.

        E = MLP(l~ || R) with R = MLP(D, dtheta). The lane half of E's first layer
        is precomputed per lane node and R's output layer doubles as the other
        half; E's output layer is folded into the K and V projections, which are
        linear in E anyway.
        """
        lane_part = ops.index(ctx.proj, (row_lane[:, None], idx))
        e = ops.relu(ops.add(lane_part, self.rel(rel_in)))
        kv = self.wkv(e)
        d = self.d
        return ops.index(kv, (Ellipsis, slice(0, d))), ops.index(kv, (Ellipsis, slice(d, 2 * d)))

    def lane_attention(self, h_top, keys, values, mask):
        """h~ = h + softmax(QK^T / sqrt(d)) V over the window; returns (h~, weights)."""
        q = self.wq(h_top)
        alpha, w = ops.attention(q, keys, values, mask, return_weights=True)
        return ops.add(h_top, alpha), w

    def step(self, ctx, row_lane, state, aux, trace=None):
        """One recurrent step. Returns (new main hidden, new waypoint hidden, waypoint)."""
        pos_in = ops.scale(state.pos, POS_SCALE)
        b, wp = self.waypoint_step(state, pos_in)
        lo, hi, idx, mask = window_span(ctx.nodes[row_lane], state.pos.data, b.data)
        rows = row_lane[:, None]
        rel_in = ops.window_geometry(state.pos, state.heading, ctx.nodes[rows, idx], ctx.dirs[rows, idx],
                                     POS_SCALE)
        keys, values = self.window_keys(ctx, row_lane, idx, rel_in)
        h_tilde, w = self.lane_attention(state.nxt[-1], keys, values, mask)
        x = ops.concat([pos_in, aux], axis=-1)
        nxt = self.gru.step(x, state.nxt, top=h_tilde)
        if trace is not None:
            win = AttentionWindow(lo, hi, idx, mask, rel_in.data[..., 0] / POS_SCALE, rel_in.data[..., 1])
            trace.append(StepTrace(b.data.copy(), win, w))
        return nxt, wp, b

    # -- encoder / decoder ---------------------------------------------------------------

    def encode(self, ctx, row_lane, pasts, headings, motion, trace=None):
        """Run over the observed past.

        pasts (R, Tp, 2), headings (R, Tp), motion (R, Tp, d) tensor. Returns the
        final state (positioned at the last observed point) and the per-step waypoints.
        """
        row_lane = np.asarray(row_lane, dtype=np.int64)
        tp = pasts.shape[1]
        state = self.init_state(pasts[:, 0], headings[:, 0])
        waypoints = []
        for t in range(tp):
            state = state._replace(pos=Tensor(pasts[:, t]), heading=Tensor(headings[:, t]))
            nxt, wp, b = self.step(ctx, row_lane, state, motion[:, t], trace)
            state = state._replace(nxt=nxt, wp=wp)
            waypoints.append(b)
        return state, waypoints

    def decode(self, ctx, row_lane, state, heads, steps, trace=None):
        """Autoregressive rollout from ``state``; row r uses predictor head ``heads[r]``.

        Returns (trajectories (R, steps, 2) tensor, offsets (R, steps, 2) tensor, waypoints).
        """
        row_lane = np.asarray(row_lane, dtype=np.int64)
        heads = np.asarray(heads, dtype=np.int64)
        rows = len(row_lane)
        token = ops.index(self.token, np.zeros(rows, dtype=np.int64))
        sel = (np.arange(rows), heads)
        points, offsets, waypoints = [], [], []
        for _ in range(steps):
            nxt, wp, b = self.step(ctx, row_lane, state, token, trace)
            out = ops.reshape(self.pred(nxt[-1]), (rows, self.k, 2))
            off = ops.index(out, sel)
            pos = ops.add(state.pos, off)
            heading = ops.heading(off, state.heading, MIN_STEP)
            state = RlaState(wp, nxt, pos, heading)
            points.append(pos)
            offsets.append(off)
            waypoints.append(b)
        return ops.stack(points, axis=1), ops.stack(offsets, axis=1), waypoints

    @staticmethod
    def repeat_state(state, rows):
        """Gather rows of a state (e.g. to fan one lane out over K heads)."""
        rows = np.asarray(rows, dtype=np.int64)
        return RlaState([ops.index(h, rows) for h in state.wp], [ops.index(h, rows) for h in state.nxt],
                        ops.index(state.pos, rows), ops.index(state.heading, rows))


def rla_encode(rla, lane_nodes, lane_dirs, lane_feats, past, past_headings, motion):
    """Single-lane encoder: returns the final main-GRU hidden stack (2 x (d,))."""
    ctx = rla.lane_context(lane_nodes[None], lane_dirs[None], ops.reshape(lane_feats, (1,) + lane_feats.shape))
    state, _ = rla.encode(ctx, np.zeros(1, dtype=np.int64), past[None], past_headings[None],
                          ops.reshape(motion, (1,) + motion.shape))
    return state


def rla_decode(rla, lane_nodes, lane_dirs, lane_feats, state, steps):
    """Single-lane decoder: K x steps x 2 trajectories from an encoder state."""
    ctx = rla.lane_context(lane_nodes[None], lane_dirs[None], ops.reshape(lane_feats, (1,) + lane_feats.shape))
    fan = RLA.repeat_state(state, np.zeros(rla.k, dtype=np.int64))
    traj, _, _ = rla.decode(ctx, np.zeros(rla.k, dtype=np.int64), fan, np.arange(rla.k), steps)
    return traj
