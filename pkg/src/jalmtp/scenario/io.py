"""Newline-delimited JSON scene files, one scene per line."""

import json

import numpy as np

from .types import TF, TP, LaneGraph, Scene, SceneError


class SceneFormatError(SceneError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


def scene_to_record(scene):
    g = scene.lane_graph
    return {
        "scene_id": scene.scene_id,
        "target_past": scene.target_past.tolist(),
        "social_pasts": scene.social_pasts.tolist(),
        "lanes": {
            "segments": [{"id": k, "nodes": v.tolist()} for k, v in g.segments.items()],
            "successors": g.successors,
            "predecessors": g.predecessors,
            "left": g.left,
            "right": g.right,
        },
        "gt_future": None if scene.gt_future is None else scene.gt_future.tolist(),
    }


def _points(rec, key, n):
    arr = np.asarray(rec[key], dtype=np.float64)
    if arr.shape != (n, 2):
        raise SceneError(f"{key} must hold {n} [x, y] points, got shape {arr.shape}")
    return arr


def record_to_scene(rec):
    for key in ("scene_id", "target_past", "social_pasts", "lanes"):
        if key not in rec:
            raise SceneError(f"missing required field {key!r}")
    lanes = rec["lanes"]
    if "segments" not in lanes:
        raise SceneError("lanes: missing required field 'segments'")
    segments = {str(s["id"]): s["nodes"] for s in lanes["segments"]}
    graph = LaneGraph(
        segments,
        lanes.get("successors", {}),
        lanes.get("predecessors", {}),
        lanes.get("left", {}),
        lanes.get("right", {}),
    ).validate()
    social = np.asarray(rec["social_pasts"], dtype=np.float64)
    if social.size == 0:
        social = np.zeros((0, TP, 2))
    elif social.ndim != 3 or social.shape[1:] != (TP, 2):
        raise SceneError(f"social_pasts must be M x {TP} x 2, got shape {social.shape}")
    gt = rec.get("gt_future")
    return Scene(
        scene_id=str(rec["scene_id"]),
        target_past=_points(rec, "target_past", TP),
        social_pasts=social,
        lane_graph=graph,
        gt_future=None if gt is None else _points(rec, "gt_future", TF),
    )


def save_scenes(path, scenes):
    with open(path, "w", encoding="utf-8") as fh:
        for s in scenes:
            fh.write(json.dumps(scene_to_record(s), separators=(",", ":")))
            fh.write("\n")


def load_scenes(path):
    scenes = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise SceneError("record is not an object")
                scenes.append(record_to_scene(rec))
            except (ValueError, KeyError, TypeError) as exc:
                raise SceneFormatError(path, lineno, str(exc)) from None
    return scenes
