"""Motion-forecasting metrics: minADE/minFDE, miss rate, probability-weighted variants, horizon curves."""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

MISS_THRESHOLD = 2.0
P_FLOOR = 0.05
PROB_TOL = 1e-6


class MetricsError(ValueError):
    pass


def _errors(preds, gt):
    preds = np.asarray(preds, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if preds.ndim != 3 or preds.shape[1:] != gt.shape or gt.ndim != 2 or preds.shape[0] < 1:
        raise MetricsError(f"predictions (K, T, 2) and gt (T, 2) expected, got {preds.shape} and {gt.shape}")
    return np.sqrt(((preds - gt[None]) ** 2).sum(-1))  # (K, T)


def min_ade_fde(preds, gt):
    """(minADE, minFDE, best_k). best_k minimizes FDE; minADE takes its own minimum."""
    err = _errors(preds, gt)
    ade = err.mean(axis=1)
    fde = err[:, -1]
    k = int(np.argmin(fde))
    return float(ade.min()), float(fde[k]), k


def miss_rate(min_fdes):
    """Fraction of scenes whose minFDE is strictly above 2 m."""
    v = np.asarray([getattr(r, "min_fde", r) for r in min_fdes], dtype=np.float64)
    if v.size == 0:
        raise MetricsError("miss rate needs at least one scene")
    return float((v > MISS_THRESHOLD).mean())


def _penalty(p):
    return min(-math.log(p), -math.log(P_FLOOR)) if p > 0 else -math.log(P_FLOOR)


def prob_metrics(preds, probs, gt):
    """(p-ADE, p-FDE, brier-ADE, brier-FDE, p-miss) with -ln p clamped at -ln 0.05.

    p-FDE and brier-FDE use the probability of the minFDE trajectory; the ADE
    variants use the probability of the minADE trajectory.
    """
    probs = np.asarray(probs, dtype=np.float64)
    err = _errors(preds, gt)
    if probs.shape != (err.shape[0],) or np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOL:
        raise MetricsError(f"probabilities must be {err.shape[0]} non-negative values summing to 1")
    ade = err.mean(axis=1)
    fde = err[:, -1]
    ka, kf = int(np.argmin(ade)), int(np.argmin(fde))
    pa, pf = float(probs[ka]), float(probs[kf])
    p_ade = ade[ka] + _penalty(pa)
    p_fde = fde[kf] + _penalty(pf)
    return (float(p_ade), float(p_fde), float(ade[ka] + (1 - pa) ** 2), float(fde[kf] + (1 - pf) ** 2),
            bool(p_fde > MISS_THRESHOLD))


def horizon_errors(preds, gt):
    """minADE and minFDE after truncating to t = 1..T (each minimized over k independently)."""
    err = _errors(preds, gt)
    t = np.arange(1, err.shape[1] + 1)
    ade = np.cumsum(err, axis=1) / t
    return ade.min(axis=0), err.min(axis=0)


@dataclass
class SceneRecord:
    scene_id: str
    min_ade: float
    min_fde: float
    best_k: int
    miss: bool
    p_ade: float
    p_fde: float
    brier_ade: float
    brier_fde: float
    p_miss: bool
    horizon_ade: list = field(repr=False)
    horizon_fde: list = field(repr=False)


def scene_record(scene_id, preds, probs, gt):
    ade, fde, k = min_ade_fde(preds, gt)
    pa, pf, ba, bf, pm = prob_metrics(preds, probs, gt)
    ha, hf = horizon_errors(preds, gt)
    return SceneRecord(scene_id, ade, fde, k, fde > MISS_THRESHOLD, pa, pf, ba, bf, pm, ha.tolist(), hf.tolist())


def horizon_curves(records):
    """Mean per-horizon minADE and minFDE over scenes, each of length T."""
    if not records:
        raise MetricsError("horizon curves need at least one scene")
    return (np.mean([r.horizon_ade for r in records], axis=0), np.mean([r.horizon_fde for r in records], axis=0))


@dataclass
class EvalReport:
    records: list
    failed: list = field(default_factory=list)

    @property
    def n(self):
        return len(self.records)

    def mean(self, name):
        return float(np.mean([getattr(r, name) for r in self.records]))

    def aggregates(self):
        if not self.records:
            raise MetricsError("report has no evaluated scenes")
        ha, hf = horizon_curves(self.records)
        return {
            "scenes": self.n,
            "failed": len(self.failed),
            "minADE": self.mean("min_ade"),
            "minFDE": self.mean("min_fde"),
            "MR": miss_rate([r.min_fde for r in self.records]),
            "p-ADE": self.mean("p_ade"),
            "p-FDE": self.mean("p_fde"),
            "p-MR": float(np.mean([r.p_miss for r in self.records])),
            "brier-ADE": self.mean("brier_ade"),
            "brier-FDE": self.mean("brier_fde"),
            "horizon_minADE": ha.tolist(),
            "horizon_minFDE": hf.tolist(),
        }

    def to_json(self):
        return {
            "penalty": f"-ln(p) clamped at -ln({P_FLOOR})",
            "miss_threshold_m": MISS_THRESHOLD,
            "aggregates": self.aggregates(),
            "scenes": [asdict(r) for r in self.records],
            "failed": self.failed,
        }

    def to_text(self, k=None):
        a = self.aggregates()
        head = f"K={k}  " if k is not None else ""
        lines = [
            f"# {head}scenes={a['scenes']}  failed={a['failed']}  "
            f"(p-metrics: -ln p clamped at -ln {P_FLOOR}; miss: minFDE > {MISS_THRESHOLD} m)",
            f"{'metric':<12}{'value':>10}",
        ]
        for name in ("minADE", "minFDE", "MR", "p-ADE", "p-FDE", "p-MR", "brier-ADE", "brier-FDE"):
            lines.append(f"{name:<12}{a[name]:>10.4f}")
        lines.append("")
        lines.append(f"{'t':>4}{'minADE':>10}{'minFDE':>10}")
        for t, (x, y) in enumerate(zip(a["horizon_minADE"], a["horizon_minFDE"]), start=1):
            lines.append(f"{t:>4}{x:>10.4f}{y:>10.4f}")
        return "\n".join(lines) + "\n"

    def write(self, path, k=None):
        """Writes ``path`` (text table) and ``path`` + ".json"."""
        with open(path, "w") as fh:
            fh.write(self.to_text(k))
        with open(str(path) + ".json", "w") as fh:
            json.dump(self.to_json(), fh, indent=1)
