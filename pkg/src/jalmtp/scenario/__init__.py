"""Scenes, lane graphs, lane proposals, normalization, synthetic data and scene files."""

from .frames import from_agent_frame, rigid_transform, to_agent_frame
from .io import SceneFormatError, load_scenes, save_scenes
from .proposals import OffMapError, extract_lane_proposals
from .synth import TEMPLATES, branch_endpoints, gen_synthetic, make_congestion_pair, make_scene
from .types import TF, TP, LaneGraph, LaneProposal, NormalizedScene, Scene, SceneError

__all__ = [
    "LaneGraph",
    "LaneProposal",
    "NormalizedScene",
    "OffMapError",
    "Scene",
    "SceneError",
    "SceneFormatError",
    "TEMPLATES",
    "TF",
    "TP",
    "branch_endpoints",
    "extract_lane_proposals",
    "from_agent_frame",
    "gen_synthetic",
    "load_scenes",
    "make_congestion_pair",
    "make_scene",
    "rigid_transform",
    "save_scenes",
    "to_agent_frame",
]
