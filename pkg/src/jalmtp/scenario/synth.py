"""Synthetic lane-graph scenarios at desk scale.

Every template is laid out in a local frame where the target approaches along
+x and sits near x = 0 at t = 0; the finished scene is then moved by a random
rigid transform. The ground-truth future follows one drivable path with a
bounded lateral offset, so each scene has a lane proposal it stays on.
"""

import math

import numpy as np

from ..geometry import DT, arc_lengths, point_at
from .frames import rigid_transform
from .types import TF, TP, LaneGraph, Scene, SceneError

TEMPLATES = ("straight", "curve", "fork", "intersection", "congestion")
LANE_WIDTH = 3.5
MAX_LATERAL = 0.25

_T = np.arange(-(TP - 1), TF + 1) * DT  # t = -1.9 s ... 3.0 s


def _line(p0, p1, step=1.0):
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    n = max(2, int(math.ceil(np.hypot(*(p1 - p0)) / step)) + 1)
    return np.linspace(p0, p1, n)


def _arc(start, hdg, radius, turn, step=1.0):
    """Arc leaving ``start`` with heading ``hdg``; ``turn`` > 0 turns left."""
    n = max(2, int(math.ceil(abs(turn) * radius / step)) + 1)
    side = 1.0 if turn > 0 else -1.0
    cx = start[0] - side * radius * math.sin(hdg)
    cy = start[1] + side * radius * math.cos(hdg)
    a0 = hdg - side * math.pi / 2
    ang = a0 + np.linspace(0.0, turn, n)
    pts = np.stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)], axis=1)
    pts[0] = start
    return pts, hdg + turn


def _heading_ray(start, hdg, length, step=1.0):
    end = np.asarray(start) + length * np.array([math.cos(hdg), math.sin(hdg)])
    return _line(start, end, step)


def _join(*polys):
    out = [polys[0]]
    for p in polys[1:]:
        out.append(p[1:] if np.hypot(*(p[0] - out[-1][-1])) < 1e-9 else p)
    return np.concatenate(out)


def _graph(segments, links, left=None, right=None):
    succ = {k: [] for k in segments}
    pred = {k: [] for k in segments}
    for a, b in links:
        succ[a].append(b)
        pred[b].append(a)
    return LaneGraph(segments, succ, pred, left or {}, right or {}).validate()


def _follow(path, s, lateral):
    """Positions at arc lengths ``s`` along ``path`` shifted by ``lateral`` along the left normal."""
    pos = point_at(path, s)
    ahead = point_at(path, s + 0.5)
    behind = point_at(path, s - 0.5)
    tan = ahead - behind
    tan /= np.maximum(np.hypot(tan[:, 0], tan[:, 1]), 1e-9)[:, None]
    normal = np.stack([-tan[:, 1], tan[:, 0]], axis=1)
    return pos + normal * np.asarray(lateral)[..., None]


def _lateral(rng):
    e0 = rng.uniform(-0.1, 0.1)
    amp = rng.uniform(0.0, MAX_LATERAL - 0.1)
    w = rng.uniform(0.5, 2.0)
    ph = rng.uniform(0, 2 * math.pi)
    return e0 + amp * np.sin(w * _T + ph)


def _const_profile(s0, v, a=0.0):
    s = s0 + v * _T + 0.5 * a * _T ** 2
    return s


def _vehicle(path, s0, v, rng, a=0.0, lateral=None):
    lat = _lateral(rng) * 0.5 if lateral is None else lateral
    return _follow(path, _const_profile(s0, v, a), lat)


def _past(traj):
    return traj[:TP]


def _parked(rng, center, heading, n=1):
    """Agents well off the drivable area (never related to any lane)."""
    out = []
    for _ in range(n):
        side = rng.choice([-1.0, 1.0])
        off = rng.uniform(14.0, 22.0)
        along = rng.uniform(-20.0, 60.0)
        base = np.asarray(center) + along * np.array([math.cos(heading), math.sin(heading)])
        base = base + side * off * np.array([-math.sin(heading), math.cos(heading)])
        drift = rng.uniform(0.0, 1.5) * np.array([math.cos(heading), math.sin(heading)])
        out.append(base + _T[:TP, None] * drift)
    return out


def _split(traj):
    return traj[:TP], traj[TP:]


# -- templates ----------------------------------------------------------------------

def _straight(rng, with_lead=None):
    seg0 = _line((-80.0, 0.0), (20.0, 0.0))
    seg1 = _line((20.0, 0.0), (200.0, 0.0))
    graph = _graph({"a": seg0, "b": seg1}, [("a", "b")])
    path = _join(seg0, seg1)
    s0 = 80.0
    v = rng.uniform(5.0, 11.0)
    acc = rng.uniform(-0.3, 0.3)
    target = _follow(path, _const_profile(s0, v, acc), _lateral(rng))
    social = []
    if with_lead if with_lead is not None else rng.random() < 0.6:
        gap = rng.uniform(25.0, 45.0)
        social.append(_past(_vehicle(path, s0 + gap, v + rng.uniform(0.0, 2.0), rng)))
    if rng.random() < 0.5:
        gap = rng.uniform(12.0, 25.0)
        social.append(_past(_vehicle(path, s0 - gap, v * rng.uniform(0.9, 1.05), rng)))
    social += _parked(rng, (0.0, 0.0), 0.0, n=int(rng.integers(0, 2)))
    return graph, target, social


def _curve(rng):
    xc = rng.uniform(0.0, 20.0)
    seg0 = _line((-80.0, 0.0), (xc, 0.0))
    turn = rng.choice([-1.0, 1.0]) * rng.uniform(math.radians(45), math.radians(90))
    arc, h = _arc(seg0[-1], 0.0, rng.uniform(25.0, 60.0), turn)
    seg2 = _heading_ray(arc[-1], h, 120.0)
    graph = _graph({"a": seg0, "b": arc, "c": seg2}, [("a", "b"), ("b", "c")])
    path = _join(seg0, arc, seg2)
    s0 = 80.0
    v = rng.uniform(5.0, 10.0)
    target = _follow(path, _const_profile(s0, v), _lateral(rng))
    social = []
    if rng.random() < 0.5:
        social.append(_past(_vehicle(path, s0 - rng.uniform(12.0, 25.0), v, rng)))
    social += _parked(rng, (0.0, 0.0), 0.0, n=int(rng.integers(0, 2)))
    return graph, target, social


def _fork(rng, branch=None):
    xf = rng.uniform(0.0, 8.0)
    seg0 = _line((-80.0, 0.0), (xf, 0.0))
    radius = rng.uniform(20.0, 35.0)
    turn = math.radians(rng.uniform(35.0, 50.0))
    left_arc, hl = _arc(seg0[-1], 0.0, radius, turn)
    right_arc, hr = _arc(seg0[-1], 0.0, radius, -turn)
    left = _join(left_arc, _heading_ray(left_arc[-1], hl, 100.0))
    right = _join(right_arc, _heading_ray(right_arc[-1], hr, 100.0))
    graph = _graph({"a": seg0, "l": left, "r": right}, [("a", "l"), ("a", "r")])
    go_left = rng.random() < 0.5 if branch is None else branch == "left"
    path = _join(seg0, left if go_left else right)
    s0 = 80.0
    v = rng.uniform(6.0, 10.0)
    target = _follow(path, _const_profile(s0, v), _lateral(rng))
    social = []
    if rng.random() < 0.5:
        social.append(_past(_vehicle(path, s0 - rng.uniform(12.0, 25.0), v, rng)))
    social += _parked(rng, (0.0, 0.0), 0.0, n=int(rng.integers(0, 2)))
    return graph, target, social


def _intersection(rng):
    xi = rng.uniform(8.0, 18.0)
    w = LANE_WIDTH
    seg_in = _line((-80.0, 0.0), (xi, 0.0))
    seg_nin = _line((-80.0, w), (xi, w))
    straight = _line((xi, 0.0), (xi + 120.0, 0.0))
    l_arc, hl = _arc(seg_in[-1], 0.0, rng.uniform(10.0, 14.0), math.pi / 2)
    r_arc, hr = _arc(seg_in[-1], 0.0, rng.uniform(6.0, 9.0), -math.pi / 2)
    left = _join(l_arc, _heading_ray(l_arc[-1], hl, 80.0))
    right = _join(r_arc, _heading_ray(r_arc[-1], hr, 80.0))
    n_straight = _line((xi, w), (xi + 120.0, w))
    cross = _line((xi + 25.0, -60.0), (xi + 25.0, 60.0))
    graph = _graph(
        {"in": seg_in, "s": straight, "l": left, "r": right, "nin": seg_nin, "ns": n_straight, "x": cross},
        [("in", "s"), ("in", "l"), ("in", "r"), ("nin", "ns")],
        left={"in": "nin"},
        right={"nin": "in"},
    )
    choice = int(rng.integers(0, 3))
    path = _join(seg_in, (straight, left, right)[choice])
    s0 = 80.0
    v = rng.uniform(4.0, 7.0) if choice else rng.uniform(6.0, 10.0)
    target = _follow(path, _const_profile(s0, v), _lateral(rng))
    social = []
    if rng.random() < 0.7:
        npath = _join(seg_nin, n_straight)
        social.append(_past(_vehicle(npath, s0 + rng.uniform(-15.0, 15.0), rng.uniform(5.0, 9.0), rng)))
    if rng.random() < 0.5:
        social.append(_past(_vehicle(cross, rng.uniform(20.0, 50.0), rng.uniform(4.0, 8.0), rng)))
    return graph, target, social


def _congestion(rng):
    """Stopped or crawling vehicle ahead on the target's lane; the target brakes from t = 0."""
    seg0 = _line((-80.0, 0.0), (20.0, 0.0))
    seg1 = _line((20.0, 0.0), (200.0, 0.0))
    graph = _graph({"a": seg0, "b": seg1}, [("a", "b")])
    path = _join(seg0, seg1)
    s0 = 80.0
    v0 = rng.uniform(6.0, 10.0)
    u = 0.0 if rng.random() < 0.6 else rng.uniform(0.3, 1.0)
    decel = rng.uniform(3.0, 4.5)
    tau = (v0 - u) / decel
    d_tau = (v0 * v0 - u * u) / (2.0 * decel)
    stop_gap = rng.uniform(6.0, 9.0)
    gap0 = stop_gap + d_tau - u * tau

    t = _T
    tb = np.clip(t, 0.0, tau)
    s_target = np.where(t <= 0.0, s0 + v0 * t, s0 + v0 * tb - 0.5 * decel * tb ** 2 + u * (t - tb))
    lat = _lateral(rng)
    target = _follow(path, s_target, lat)
    free = _follow(path, s0 + v0 * t, lat)

    blocker = _past(_follow(path, s0 + gap0 + u * t, rng.uniform(-0.2, 0.2)))
    social = [blocker]
    others = []
    if rng.random() < 0.5:
        others.append(_past(_vehicle(path, s0 - rng.uniform(12.0, 25.0), v0, rng)))
    others += _parked(rng, (0.0, 0.0), 0.0, n=int(rng.integers(0, 2)))
    return graph, target, social + others, free, others


_BUILDERS = {
    "straight": _straight,
    "curve": _curve,
    "fork": _fork,
    "intersection": _intersection,
}


def _finish(sid, graph, target, social, rng):
    past, fut = _split(target)
    scene = Scene(
        scene_id=sid,
        target_past=past,
        social_pasts=np.array(social) if social else np.zeros((0, TP, 2)),
        lane_graph=graph,
        gt_future=fut,
    )
    angle = rng.uniform(-math.pi, math.pi)
    shift = rng.uniform(-500.0, 500.0, size=2)
    return rigid_transform(scene, angle, shift)


def make_scene(template, seed, index=0, **options):
    """One scene from ``template``; deterministic in (template, seed, index)."""
    if template not in TEMPLATES:
        raise SceneError(f"unknown template {template!r}; choose from {', '.join(TEMPLATES)}")
    rng = np.random.default_rng([seed, index, TEMPLATES.index(template)])
    sid = f"{template}-{seed}-{index:05d}"
    if template == "congestion":
        graph, target, social, _, _ = _congestion(rng)
    else:
        graph, target, social = _BUILDERS[template](rng, **options)
    return _finish(sid, graph, target, social, rng)


def make_congestion_pair(seed, index=0):
    """(congested scene, matched free-lane scene).

    Both share the lane graph, the target's past and the other agents; the free
    scene drops the blocking vehicle and its future keeps the past speed.
    """
    rng = np.random.default_rng([seed, index, TEMPLATES.index("congestion")])
    graph, target, social, free, others = _congestion(rng)
    state = rng.bit_generator.state
    jam = _finish(f"congestion-{seed}-{index:05d}", graph, target, social, rng)
    rng.bit_generator.state = state
    clear = _finish(f"congestion-free-{seed}-{index:05d}", graph, free, others, rng)
    return jam, clear


def allocate(mix, count):
    """Split ``count`` scenes over a {template: weight} mix (largest remainder)."""
    for name in mix:
        if name not in TEMPLATES:
            raise SceneError(f"unknown template {name!r}; choose from {', '.join(TEMPLATES)}")
    total = float(sum(mix.values()))
    if total <= 0:
        raise SceneError("template mix weights must sum to a positive value")
    raw = {k: count * w / total for k, w in mix.items()}
    out = {k: int(math.floor(v)) for k, v in raw.items()}
    rest = count - sum(out.values())
    for k in sorted(raw, key=lambda k: (-(raw[k] - out[k]), list(mix).index(k)))[:rest]:
        out[k] += 1
    return out


def gen_synthetic(mix, count, seed):
    """``count`` scenes drawn from ``mix`` ({template: weight}), grouped by template."""
    scenes = []
    for template, n in allocate(mix, count).items():
        for i in range(n):
            scenes.append(make_scene(template, seed, i))
    return scenes


def branch_endpoints(scene, proposals):
    """Where the target would be at t = Tf on each proposal if it kept its travelled distance.

    Used to score multimodality on fork scenes.
    """
    from ..geometry import project

    travelled = float(np.sum(np.hypot(*np.diff(
        np.concatenate([scene.target_past[-1:], scene.gt_future]), axis=0).T)))
    ends = []
    for prop in proposals:
        s, _ = project(prop.nodes, scene.target_past[-1])
        ends.append(point_at(prop.nodes, min(s + travelled, arc_lengths(prop.nodes)[-1])))
    return np.array(ends)
