"""Rigid world <-> agent-frame normalization."""

import numpy as np

from ..geometry import heading
from .types import NormalizedScene, Scene


def to_agent_frame(scene):
    """Translate the target's t=0 position to the origin and rotate its heading onto +x."""
    origin = scene.target_past[-1].copy()
    rotation = -heading(scene.target_past, -1)
    norm = NormalizedScene(scene=None, origin=origin, rotation=rotation)
    moved = Scene(
        scene_id=scene.scene_id,
        target_past=norm.to_agent(scene.target_past),
        social_pasts=norm.to_agent(scene.social_pasts) if scene.num_agents else scene.social_pasts,
        lane_graph=scene.lane_graph.transformed(norm.to_agent),
        gt_future=None if scene.gt_future is None else norm.to_agent(scene.gt_future),
    )
    norm.scene = moved
    return norm


def from_agent_frame(norm):
    """Inverse of :func:`to_agent_frame`: the scene back in world coordinates."""
    s = norm.scene
    return Scene(
        scene_id=s.scene_id,
        target_past=norm.to_world(s.target_past),
        social_pasts=norm.to_world(s.social_pasts) if s.num_agents else s.social_pasts,
        lane_graph=s.lane_graph.transformed(norm.to_world),
        gt_future=None if s.gt_future is None else norm.to_world(s.gt_future),
    )


def rigid_transform(scene, angle, translation):
    """Rotate a whole scene by ``angle`` about the world origin, then translate."""
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    t = np.asarray(translation, dtype=np.float64)

    def fn(p):
        return np.asarray(p) @ rot.T + t

    return Scene(
        scene_id=scene.scene_id,
        target_past=fn(scene.target_past),
        social_pasts=fn(scene.social_pasts) if scene.num_agents else scene.social_pasts,
        lane_graph=scene.lane_graph.transformed(fn),
        gt_future=None if scene.gt_future is None else fn(scene.gt_future),
    )
