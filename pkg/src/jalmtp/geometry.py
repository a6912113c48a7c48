"""Polyline and kinematic helpers. All inputs are (n, 2) arrays in meters."""

import math
from typing import NamedTuple

import numpy as np

from . import kernels

DT = 0.1
MIN_SEP = 1e-9
MIN_DISP = 1e-6


class GeometryError(ValueError):
    pass


class Rollout(NamedTuple):
    points: np.ndarray
    dt: float


def as_polyline(nodes):
    """Validate and return ``nodes`` as a float (n, 2) polyline."""
    p = np.asarray(nodes, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 2 or len(p) < 2:
        raise GeometryError(f"polyline needs >= 2 nodes of shape (n, 2), got {p.shape}")
    seg = np.hypot(*np.diff(p, axis=0).T)
    if np.any(seg <= MIN_SEP):
        raise GeometryError("polyline has coincident consecutive nodes")
    return p


def arc_lengths(poly):
    """Cumulative arc length at every node, starting at 0."""
    seg = np.hypot(*np.diff(poly, axis=0).T)
    return np.concatenate([[0.0], np.cumsum(seg)])


def point_at(poly, s):
    """Point(s) at arc length ``s`` (clipped to the polyline)."""
    cum = arc_lengths(poly)
    s = np.clip(s, 0.0, cum[-1])
    return np.stack([np.interp(s, cum, poly[:, 0]), np.interp(s, cum, poly[:, 1])], axis=-1)


def resample(poly, count):
    """Resample to ``count`` nodes evenly spaced in arc length along ``poly``.

    Endpoints are kept exactly. Spacing is measured along the input polyline,
    so chords equal that spacing wherever the input is straight.
    """
    if count < 2:
        raise GeometryError(f"resample needs count >= 2, got {count}")
    p = np.asarray(poly, dtype=np.float64)
    if p.ndim != 2 or len(p) < 2:
        raise GeometryError("resample needs a polyline with >= 2 nodes")
    cum = arc_lengths(p)
    if cum[-1] <= MIN_SEP:
        raise GeometryError("cannot resample a zero-length polyline")
    keep = np.concatenate([[True], np.diff(cum) > 0])
    cum, p = cum[keep], p[keep]
    s = np.linspace(0.0, cum[-1], count)
    out = np.stack([np.interp(s, cum, p[:, 0]), np.interp(s, cum, p[:, 1])], axis=1)
    out[0] = p[0]
    out[-1] = p[-1]
    return out


def nearest_node(poly, point):
    """(index, distance) of the node closest to ``point``; ties go to the lower index."""
    nodes = np.ascontiguousarray(poly, dtype=np.float64)[None]
    pt = np.ascontiguousarray(point, dtype=np.float64).reshape(1, 2)
    idx, dist = kernels.nearest_nodes(nodes, pt)
    return int(idx[0]), float(dist[0])


def project(poly, point):
    """Closest point on the polyline's segments: (arc length, distance)."""
    a = poly[:-1]
    d = np.diff(poly, axis=0)
    L2 = (d * d).sum(axis=1)
    t = np.clip(((point - a) * d).sum(axis=1) / L2, 0.0, 1.0)
    foot = a + t[:, None] * d
    dist = np.hypot(*(foot - point).T)
    i = int(np.argmin(dist))
    return float(arc_lengths(poly)[i] + t[i] * math.sqrt(L2[i])), float(dist[i])


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=np.float64) + math.pi, 2.0 * math.pi) - math.pi
    w = np.where(w == -math.pi, math.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def angle_diff(a, b):
    return wrap_angle(np.asarray(a) - np.asarray(b))


def heading(traj, t):
    """Heading of the displacement that ends at index ``t``.

    Displacements shorter than 1e-6 m are skipped in favour of the most recent
    valid one; with no valid displacement the heading is 0.
    """
    traj = np.asarray(traj, dtype=np.float64)
    if len(traj) < 2:
        raise GeometryError("heading needs >= 2 points")
    t = t % len(traj)
    for i in range(t, 0, -1):
        dx, dy = traj[i] - traj[i - 1]
        if math.hypot(dx, dy) >= MIN_DISP:
            return wrap_angle(math.atan2(dy, dx))
    return 0.0


def headings(traj):
    """``heading(traj, t)`` for every t, in one pass."""
    traj = np.asarray(traj, dtype=np.float64)
    out = np.zeros(len(traj))
    last = 0.0
    for i in range(1, len(traj)):
        dx, dy = traj[i] - traj[i - 1]
        if math.hypot(dx, dy) >= MIN_DISP:
            last = wrap_angle(math.atan2(dy, dx))
        out[i] = last
    return out


def lane_direction(poly, h):
    """Tangent direction at node ``h``: segment h -> h+1, or h-1 -> h for the last node."""
    n = len(poly)
    if not -n <= h < n:
        raise IndexError(f"node index {h} out of range for {n} nodes")
    h = h % n
    a, b = (h, h + 1) if h < n - 1 else (h - 1, h)
    dx, dy = poly[b] - poly[a]
    return wrap_angle(math.atan2(dy, dx))


def lane_directions(poly):
    d = np.diff(poly, axis=0)
    ang = np.arctan2(d[:, 1], d[:, 0])
    return wrap_angle(np.concatenate([ang, ang[-1:]]))


def const_accel_rollout(past, horizon, dt=DT):
    """Constant-acceleration extrapolation of the last observed states.

    Velocity and acceleration are per-step finite differences of the last three
    points. Once the velocity would turn against its initial direction the
    motion stops accelerating and continues with the velocity it has at that
    instant (zero for straight-line braking), so rollouts never reverse.
    With two points this is constant velocity; with one it holds position.
    """
    past = np.asarray(past, dtype=np.float64)
    steps = np.arange(1, horizon + 1, dtype=np.float64)
    if len(past) == 0:
        raise GeometryError("rollout needs at least one past point")
    p0 = past[-1]
    if len(past) < 2:
        return Rollout(np.tile(p0, (horizon, 1)), dt)
    v0 = past[-1] - past[-2]
    a0 = past[-1] - 2.0 * past[-2] + past[-3] if len(past) >= 3 else np.zeros(2)
    pts = p0 + steps[:, None] * v0 + 0.5 * steps[:, None] ** 2 * a0
    va = float(v0 @ a0)
    if va < 0.0:
        t_stop = -float(v0 @ v0) / va
        late = steps > t_stop
        if np.any(late):
            p_stop = p0 + t_stop * v0 + 0.5 * t_stop ** 2 * a0
            v_stop = v0 + t_stop * a0
            pts[late] = p_stop + (steps[late] - t_stop)[:, None] * v_stop
    return Rollout(pts, dt)
