"""Prediction export, evaluation driver and SVG scene plots."""

import json
import logging
from xml.sax.saxutils import escape

import numpy as np

from ..metrics import EvalReport, scene_record
from ..model.network import prepare
from ..scenario import OffMapError, SceneError

log = logging.getLogger(__name__)


class PredictionRecord:
    """Per-scene result: world-frame trajectories and probabilities, or a failure note."""

    def __init__(self, scene_id, trajectories=None, probs=None, error=None, short=False):
        self.scene_id = scene_id
        self.trajectories = None if trajectories is None else np.asarray(trajectories, dtype=np.float64)
        self.probs = None if probs is None else np.asarray(probs, dtype=np.float64)
        self.error = error
        self.short = short

    @property
    def ok(self):
        return self.error is None

    def to_dict(self):
        if not self.ok:
            return {"scene_id": self.scene_id, "status": "failed", "error": self.error}
        return {"scene_id": self.scene_id, "status": "ok", "trajectories": self.trajectories.tolist(),
                "probs": self.probs.tolist(), "short": self.short}

    @classmethod
    def from_dict(cls, d):
        if d.get("status") == "failed":
            return cls(d["scene_id"], error=d.get("error", "failed"))
        return cls(d["scene_id"], d["trajectories"], d["probs"], short=d.get("short", False))


def predict(model, scenes, k=None):
    """One PredictionRecord per scene; off-map scenes are recorded as failed."""
    out = []
    for sc in scenes:
        try:
            item = prepare(sc, model.cfg)
        except (OffMapError, SceneError) as exc:
            log.warning("prediction failed for %s: %s", sc.scene_id, exc)
            out.append(PredictionRecord(sc.scene_id, error=str(exc)))
            continue
        p = model.predict(item, k)
        if p.short:
            log.warning("%s: only %d candidate trajectories available", sc.scene_id, len(p.probs))
        out.append(PredictionRecord(sc.scene_id, p.trajectories, p.probs, short=p.short))
    return out


def save_predictions(path, records):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict()) + "\n")


def load_predictions(path):
    out = []
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(PredictionRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise SceneError(f"{path}:{n}: malformed prediction record ({exc})") from None
    return out


def evaluate_predictions(scenes, records):
    by_id = {r.scene_id: r for r in records}
    recs, failed = [], []
    for sc in scenes:
        if sc.gt_future is None:
            raise SceneError(f"scene {sc.scene_id}: evaluation needs a ground-truth future")
        r = by_id.get(sc.scene_id)
        if r is None or not r.ok:
            failed.append({"scene_id": sc.scene_id, "error": "no prediction" if r is None else r.error})
            continue
        recs.append(scene_record(sc.scene_id, r.trajectories, r.probs, sc.gt_future))
    return EvalReport(recs, failed)


def evaluate(model, scenes, k=None):
    return evaluate_predictions(scenes, predict(model, scenes, k))


# -- plotting ------------------------------------------------------------------------------

def _path(points, tf):
    return " ".join(f"{x:.3f},{y:.3f}" for x, y in (tf(p) for p in points))


def plot(scene, prediction, path, size=800, margin=20.0):
    """Write a standalone SVG: lanes grey, past orange, ground truth red, predictions blue
    with opacity equal to their probability."""
    focus = [scene.target_past]
    if scene.gt_future is not None:
        focus.append(scene.gt_future)
    if prediction is not None and prediction.ok:
        focus += list(prediction.trajectories)
    focus = np.concatenate(focus)
    lo = focus.min(axis=0) - margin
    hi = focus.max(axis=0) + margin
    span = float(max(hi - lo))
    s = size / span

    def tf(p):
        return (p[0] - lo[0]) * s, size - (p[1] - lo[1]) * s

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f"<title>{escape(scene.scene_id)}</title>",
             f'<rect width="{size}" height="{size}" fill="white"/>']
    for sid, nodes in scene.lane_graph.segments.items():
        parts.append(f'<polyline class="lane" data-id="{escape(sid)}" points="{_path(nodes, tf)}" '
                     f'fill="none" stroke="grey" stroke-width="2"/>')
    for j, past in enumerate(scene.social_pasts):
        parts.append(f'<polyline class="social" points="{_path(past, tf)}" fill="none" stroke="black" '
                     f'stroke-width="1.5" stroke-opacity="0.5"/>')
    parts.append(f'<polyline class="past" points="{_path(scene.target_past, tf)}" fill="none" '
                 f'stroke="orange" stroke-width="3"/>')
    if scene.gt_future is not None:
        gt = np.concatenate([scene.target_past[-1:], scene.gt_future])
        parts.append(f'<polyline class="gt" points="{_path(gt, tf)}" fill="none" stroke="red" '
                     f'stroke-width="3"/>')
    if prediction is not None and prediction.ok:
        for traj, p in zip(prediction.trajectories, prediction.probs):
            full = np.concatenate([scene.target_past[-1:], traj])
            parts.append(f'<polyline class="pred" points="{_path(full, tf)}" fill="none" stroke="blue" '
                         f'stroke-width="2" stroke-opacity="{float(p):.4f}"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
    return path
