"""Scene data model."""

from dataclasses import dataclass, field

import numpy as np

from ..geometry import as_polyline

TP = 20
TF = 30


class SceneError(ValueError):
    pass


@dataclass
class LaneGraph:
    """Lane centerline segments and their connectivity. Ids are strings."""

    segments: dict
    successors: dict = field(default_factory=dict)
    predecessors: dict = field(default_factory=dict)
    left: dict = field(default_factory=dict)
    right: dict = field(default_factory=dict)

    def __post_init__(self):
        self.segments = {str(k): as_polyline(v) for k, v in self.segments.items()}
        ids = self.segments.keys()
        self.successors = {k: [str(s) for s in self.successors.get(k, [])] for k in ids}
        self.predecessors = {k: [str(s) for s in self.predecessors.get(k, [])] for k in ids}
        self.left = {k: (None if self.left.get(k) is None else str(self.left[k])) for k in ids}
        self.right = {k: (None if self.right.get(k) is None else str(self.right[k])) for k in ids}

    def validate(self, join_tol=0.5):
        for sid, succ in self.successors.items():
            for t in succ:
                if t not in self.segments:
                    raise SceneError(f"segment {sid}: unknown successor {t}")
                if sid not in self.predecessors[t]:
                    raise SceneError(f"segment {sid} -> {t} missing from predecessors of {t}")
                gap = np.hypot(*(self.segments[t][0] - self.segments[sid][-1]))
                if gap > join_tol:
                    raise SceneError(f"successor {t} starts {gap:.2f} m from the end of {sid}")
        for sid, pred in self.predecessors.items():
            for t in pred:
                if t not in self.segments or sid not in self.successors[t]:
                    raise SceneError(f"segment {sid}: predecessor {t} not mirrored in successors")
        for side in (self.left, self.right):
            for sid, nb in side.items():
                if nb is not None and nb not in self.segments:
                    raise SceneError(f"segment {sid}: unknown neighbour {nb}")
        return self

    def transformed(self, fn):
        """Copy with every node mapped through ``fn`` ((n, 2) -> (n, 2))."""
        return LaneGraph(
            {k: fn(v) for k, v in self.segments.items()},
            dict(self.successors), dict(self.predecessors), dict(self.left), dict(self.right),
        )


@dataclass
class Scene:
    scene_id: str
    target_past: np.ndarray
    social_pasts: np.ndarray
    lane_graph: LaneGraph
    gt_future: np.ndarray = None

    def __post_init__(self):
        self.target_past = np.asarray(self.target_past, dtype=np.float64)
        sp = np.asarray(self.social_pasts, dtype=np.float64)
        self.social_pasts = sp.reshape(0, TP, 2) if sp.size == 0 else sp
        if self.gt_future is not None:
            self.gt_future = np.asarray(self.gt_future, dtype=np.float64)
        if self.target_past.shape != (TP, 2):
            raise SceneError(f"scene {self.scene_id}: target_past must be ({TP}, 2), got {self.target_past.shape}")
        if self.social_pasts.ndim != 3 or self.social_pasts.shape[1:] != (TP, 2):
            raise SceneError(f"scene {self.scene_id}: social_pasts must be (M, {TP}, 2), got {self.social_pasts.shape}")
        if self.gt_future is not None and self.gt_future.shape != (TF, 2):
            raise SceneError(f"scene {self.scene_id}: gt_future must be ({TF}, 2), got {self.gt_future.shape}")
        for name in ("target_past", "social_pasts", "gt_future"):
            arr = getattr(self, name)
            if arr is not None and not np.all(np.isfinite(arr)):
                raise SceneError(f"scene {self.scene_id}: non-finite values in {name}")

    @property
    def num_agents(self):
        return len(self.social_pasts)


@dataclass
class LaneProposal:
    nodes: np.ndarray
    source_segment_ids: list
    start_distance: float = 0.0


@dataclass
class NormalizedScene:
    """A scene expressed in the target's frame plus the world -> agent transform.

    Agent-frame point = R(theta) @ (world - origin) with ``rotation`` = -heading.
    """

    scene: Scene
    origin: np.ndarray
    rotation: float

    def _mat(self, angle):
        c, s = np.cos(angle), np.sin(angle)
        return np.array([[c, -s], [s, c]])

    def to_agent(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return (pts - self.origin) @ self._mat(self.rotation).T

    def to_world(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self._mat(-self.rotation).T + self.origin
