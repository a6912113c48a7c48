"""Trajectory and lane-node feature extractors.

Positions enter the networks scaled by ``POS_SCALE`` so agent-frame coordinates
of up to ~100 m stay O(1); displacements (about 1 m per step) enter unscaled.
"""

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..geometry import lane_directions
from .params import GRUCell, Conv1d, MultiScaleConv

POS_SCALE = 0.1


def motion_channels(trajs):
    """(B, T, 2) -> (B, T, 4): scaled position and per-step displacement (zero at t=0)."""
    trajs = np.asarray(trajs, dtype=np.float64)
    disp = np.zeros_like(trajs)
    disp[:, 1:] = np.diff(trajs, axis=1)
    return np.concatenate([trajs * POS_SCALE, disp], axis=-1)


def lane_channels(lanes):
    """(L, H, 2) -> (L, H, 4): scaled position and tangent direction (sin, cos)."""
    lanes = np.asarray(lanes, dtype=np.float64)
    out = np.empty(lanes.shape[:2] + (4,))
    for i, poly in enumerate(lanes):
        ang = lane_directions(poly)
        out[i, :, 0:2] = poly * POS_SCALE
        out[i, :, 2] = np.sin(ang)
        out[i, :, 3] = np.cos(ang)
    return out


class TargetEncoder:
    """Multi-scale 1D CNN over the target's past; one d-wide feature per past step."""

    def __init__(self, store, d):
        self.net = MultiScaleConv(store, "target", 4, d)
        self.d = d

    def __call__(self, pasts):
        return self.net(Tensor(motion_channels(pasts)))


class SocialEncoder:
    """1D CNN over time followed by a GRU; the final hidden state is the agent's feature.

    Agents are processed with row-independent arithmetic, so an agent's feature
    is bit-identical whatever other agents share the batch and in whatever order.
    """

    def __init__(self, store, d):
        self.conv = Conv1d(store, "social.conv", 4, d, 3)
        self.gru = GRUCell(store, "social.gru", d, d)
        self.d = d

    def __call__(self, pasts):
        pasts = np.asarray(pasts, dtype=np.float64)
        m = len(pasts)
        if m == 0:
            return Tensor(np.zeros((0, self.d)))
        x = ops.relu(self.conv(Tensor(motion_channels(pasts)), rowwise=True))
        h = Tensor(np.zeros((m, self.d)))
        for t in range(pasts.shape[1]):
            h = self.gru(x[:, t], h, rowwise=True)
        return h


class LaneEncoder:
    """Multi-scale 1D CNN along the node axis of each proposal."""

    def __init__(self, store, d):
        self.net = MultiScaleConv(store, "lane", 4, d)
        self.d = d

    def __call__(self, lanes):
        return self.net(Tensor(lane_channels(lanes)))


def encode_target(encoder, past):
    """(Tp, 2) agent-frame past -> (Tp, d) motion feature."""
    return encoder(np.asarray(past)[None])[0]


def encode_social(encoder, pasts):
    """(M, Tp, 2) -> (M, d); M = 0 gives an empty (0, d) feature set."""
    return encoder(pasts)


def encode_lane(encoder, nodes):
    """(H, 2) resampled proposal -> (H, d)."""
    return encoder(np.asarray(nodes)[None])[0]
