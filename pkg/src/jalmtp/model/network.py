"""Full model: scene preparation, batched forward, training objective and inference."""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor, no_record
from ..geometry import headings, lane_directions
from ..scenario import TF, TP, extract_lane_proposals, to_agent_frame
from .encoders import LaneEncoder, SocialEncoder, TargetEncoder
from .params import ParamStore
from .rla import RLA
from .s2l import S2L, THRESHOLD, build_pairs, concat_pairs
from .selectors import (
    LaneSelector,
    TrajSelector,
    ambiguous,
    combine_and_pick,
    lane_labels,
    lane_select,
    total_loss,
    traj_labels,
    traj_select,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    d: int = 64
    K: int = 6
    H: int = 50
    max_N: int = 10
    threshold: float = THRESHOLD
    lambda1: float = 1.0
    lambda2: float = 1.0
    waypoint_weight: float = 0.5
    lookahead: int = 10


class Prepared(NamedTuple):
    """A scene in the agent frame with everything the network reads."""

    scene_id: str
    norm: object            # NormalizedScene
    nodes: np.ndarray       # (N, H, 2)
    dirs: np.ndarray        # (N, H)
    past: np.ndarray        # (Tp, 2)
    past_heading: np.ndarray  # (Tp,)
    social: np.ndarray      # (M, Tp, 2)
    gt: Optional[np.ndarray]  # (Tf, 2) or None
    lane_label: Optional[np.ndarray]  # (N,) or None

    @property
    def n_lanes(self):
        return len(self.nodes)


class Prediction(NamedTuple):
    scene_id: str
    trajectories: np.ndarray   # (K, Tf, 2) world frame
    probs: np.ndarray          # (K,)
    lanes: np.ndarray          # (K,) source lane per pick
    heads: np.ndarray          # (K,)
    agent_frame: np.ndarray    # (K, Tf, 2)
    lane_probs: np.ndarray     # (N,)
    traj_probs: np.ndarray     # (N, K)
    short: bool


def _past_headings(past):
    h = headings(past)
    h[0] = h[1]
    return h


def prepare(scene, cfg=ModelConfig()):
    """Normalize, extract proposals and labels. Raises OffMapError for off-map scenes."""
    norm = to_agent_frame(scene)
    s = norm.scene
    props = extract_lane_proposals(s, H=cfg.H, max_N=cfg.max_N)
    nodes = np.stack([p.nodes for p in props])
    dirs = np.stack([lane_directions(n) for n in nodes])
    gt = s.gt_future
    label = lane_labels(nodes, gt) if gt is not None else None
    return Prepared(scene.scene_id, norm, nodes, dirs, s.target_past, _past_headings(s.target_past),
                    np.asarray(s.social_pasts, dtype=np.float64).reshape(-1, TP, 2), gt, label)


class Batch(NamedTuple):
    items: list
    owner: np.ndarray       # (L,) scene index of every lane
    first: np.ndarray       # (B,) first global lane index per scene
    nodes: np.ndarray       # (L, H, 2)
    dirs: np.ndarray        # (L, H)
    social: np.ndarray      # (M, Tp, 2)
    pairs: object
    pasts: np.ndarray       # (B, Tp, 2)
    past_heading: np.ndarray  # (B, Tp)


def make_batch(items, cfg):
    owner, first, pair_sets, socials = [], [], [], []
    lane_at = agent_at = 0
    for b, it in enumerate(items):
        first.append(lane_at)
        owner += [b] * it.n_lanes
        pair_sets.append(build_pairs(it.nodes, it.social, cfg.threshold, TF, lane_at, agent_at))
        socials.append(it.social)
        lane_at += it.n_lanes
        agent_at += len(it.social)
    return Batch(
        items, np.array(owner, dtype=np.int64), np.array(first, dtype=np.int64),
        np.concatenate([it.nodes for it in items]), np.concatenate([it.dirs for it in items]),
        np.concatenate(socials) if agent_at else np.zeros((0, TP, 2)),
        concat_pairs(pair_sets),
        np.stack([it.past for it in items]), np.stack([it.past_heading for it in items]),
    )


class JalMTP:
    """Encoders -> S2L -> RLA encode -> lane selector -> RLA decode -> trajectory selector."""

    def __init__(self, cfg=ModelConfig(), seed=0):
        self.cfg = cfg
        self.params = ParamStore(seed)
        d = cfg.d
        self.target_enc = TargetEncoder(self.params, d)
        self.social_enc = SocialEncoder(self.params, d)
        self.lane_enc = LaneEncoder(self.params, d)
        self.s2l = S2L(self.params, d)
        self.rla = RLA(self.params, d, cfg.K)
        self.lane_sel = LaneSelector(self.params, d)
        self.traj_sel = TrajSelector(self.params, d, TF)

    # -- shared trunk -------------------------------------------------------------

    def instance_lanes(self, batch):
        lane_feats = self.lane_enc(batch.nodes)
        social = self.social_enc(batch.social)
        return self.s2l(lane_feats, social, batch.pairs)

    def encode(self, batch, trace=None):
        """Returns (lane context, final encoder state per lane, encoder waypoints, lane logits (L,))."""
        inst = self.instance_lanes(batch)
        ctx = self.rla.lane_context(batch.nodes, batch.dirs, inst)
        motion = self.target_enc(batch.pasts)
        row_lane = np.arange(len(batch.owner))
        state, wps = self.rla.encode(ctx, row_lane, batch.pasts[batch.owner], batch.past_heading[batch.owner],
                                     ops.index(motion, batch.owner), trace)
        return ctx, state, wps, self.lane_sel.logits(state.nxt[-1])

    def decode(self, ctx, state, lanes, trace=None):
        """Decode the K heads of each global lane in ``lanes``.

        Returns (trajectories (n, K, Tf, 2), offsets (n, K, Tf, 2), waypoints, traj logits (n, K)).
        """
        k = self.cfg.K
        lanes = np.asarray(lanes, dtype=np.int64)
        rows = np.repeat(lanes, k)
        heads = np.tile(np.arange(k), len(lanes))
        st = self.rla.repeat_state(state, rows)
        traj, off, wps = self.rla.decode(ctx, rows, st, heads, TF, trace)
        n = len(lanes)
        traj = ops.reshape(traj, (n, k, TF, 2))
        off = ops.reshape(off, (n, k, TF, 2))
        logits = self.traj_sel.logits(off, ops.index(state.nxt[-1], lanes))
        return traj, off, wps, logits

    # -- training -----------------------------------------------------------------------

    def loss(self, items):
        """Training objective on prepared scenes with ground truth.

        The most likely lane (by label) of each scene is decoded; returns (objective tensor, parts).
        """
        cfg = self.cfg
        batch = make_batch(items, cfg)
        ctx, state, enc_wps, lane_logits = self.encode(batch)
        best = np.array([it.lane_label.argmax() for it in items], dtype=np.int64) + batch.first
        traj, off, dec_wps, traj_logits = self.decode(ctx, state, best)

        nmax = max(it.n_lanes for it in items)
        gather = np.zeros((len(items), nmax), dtype=np.int64)
        mask = np.zeros((len(items), nmax), dtype=bool)
        lbl = np.zeros((len(items), nmax))
        for b, it in enumerate(items):
            gather[b, :it.n_lanes] = batch.first[b] + np.arange(it.n_lanes)
            mask[b, :it.n_lanes] = True
            lbl[b, :it.n_lanes] = it.lane_label
        gt = np.stack([it.gt for it in items])
        t_lbl = np.stack([traj_labels(traj.data[b], gt[b]) for b in range(len(items))])
        total, parts = total_loss(traj, gt, ops.index(lane_logits, gather), lbl, mask, traj_logits, t_lbl,
                                  cfg.lambda1, cfg.lambda2)
        if cfg.waypoint_weight > 0:
            wp = self._waypoint_loss(batch, gt, enc_wps, dec_wps)
            total = ops.add(total, ops.scale(wp, cfg.waypoint_weight))
            parts["waypoint"] = wp.item()
        parts["total"] = total.item()
        return total, parts

    def _waypoint_loss(self, batch, gt, enc_wps, dec_wps):
        """Mean distance from each waypoint to the true position ``lookahead`` steps ahead."""
        track = np.concatenate([batch.pasts, gt], axis=1)  # (B, Tp + Tf, 2)
        last = track.shape[1] - 1
        la = self.cfg.lookahead
        enc_t = np.minimum(np.arange(TP) + la, last)
        enc_target = track[batch.owner][:, enc_t]                         # (L, Tp, 2)
        dec_t = np.minimum(TP - 1 + np.arange(TF) + la, last)
        dec_target = np.repeat(track[:, dec_t], self.cfg.K, axis=0)      # (B*K, Tf, 2)
        e = ops.norm(ops.sub(ops.stack(enc_wps, axis=1), Tensor(enc_target)), axis=-1)
        d = ops.norm(ops.sub(ops.stack(dec_wps, axis=1), Tensor(dec_target)), axis=-1)
        return ops.scale(ops.add(ops.sum(e), ops.sum(d)), 1.0 / (e.size + d.size))

    # -- inference -----------------------------------------------------------------------

    def forward_scene(self, item, trace=None):
        """All lanes, all heads: (trajs (N, K, Tf, 2), lane probs (N,), traj probs (N, K))."""
        with no_record():
            batch = make_batch([item], self.cfg)
            ctx, state, _, lane_logits = self.encode(batch, trace)
            traj, _, _, traj_logits = self.decode(ctx, state, np.arange(item.n_lanes), trace)
        return traj.data, lane_select(lane_logits.data), traj_select(traj_logits.data)

    def predict(self, item, k=None):
        k = self.cfg.K if k is None else k
        trajs, lp, tp = self.forward_scene(item)
        pick, _ = combine_and_pick(lp, tp, k)
        local = trajs[pick.lane, pick.head]
        world = np.stack([item.norm.to_world(t) for t in local]) if len(local) else local
        return Prediction(item.scene_id, world, pick.probs, pick.lane, pick.head, local, lp, tp, pick.short)


def prepare_training(scenes, cfg):
    """Prepared scenes usable for training; off-map and label-ambiguous scenes are skipped and logged."""
    from ..scenario import OffMapError

    kept, skipped = [], []
    for sc in scenes:
        if sc.gt_future is None:
            raise ValueError(f"scene {sc.scene_id}: training needs a ground-truth future")
        try:
            it = prepare(sc, cfg)
        except OffMapError as e:
            log.warning("skipping %s: %s", sc.scene_id, e)
            skipped.append((sc.scene_id, "off-map"))
            continue
        if ambiguous(it.lane_label):
            log.warning("skipping %s: lane labels carry no preference", sc.scene_id)
            skipped.append((sc.scene_id, "ambiguous-labels"))
            continue
        kept.append(it)
    return kept, skipped
