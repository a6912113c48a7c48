"""Heuristic lane-proposal extraction by depth-first search over successors."""

import math

import numpy as np

from ..geometry import angle_diff, arc_lengths, heading, lane_direction, point_at, project, resample
from .types import LaneProposal, SceneError

H_DEFAULT = 50
MAX_N_DEFAULT = 10
LOOK_LENGTH = 100.0
BACK_MARGIN = 20.0
MAX_START_DIST = 25.0
DEDUP_SHARE = 0.8


class OffMapError(SceneError):
    pass


def _join(polys):
    out = [polys[0]]
    for p in polys[1:]:
        if np.hypot(*(p[0] - out[-1][-1])) <= 1e-6:
            p = p[1:]
        out.append(p)
    return np.concatenate(out, axis=0)


def _seg_len(poly):
    return float(arc_lengths(poly)[-1])


def _connected(graph, a, b):
    return b in graph.successors[a] or b in graph.predecessors[a]


def _start_candidates(graph, pos, hdg, moving):
    cands = []
    for sid in sorted(graph.segments):
        poly = graph.segments[sid]
        s, d = project(poly, pos)
        if d > MAX_START_DIST:
            continue
        cands.append((d, sid, s))
    if not cands:
        raise OffMapError("off-map scene: no lane segment within 25 m of the target")
    if moving:
        aligned = []
        for d, sid, s in cands:
            poly = graph.segments[sid]
            h = int(np.searchsorted(arc_lengths(poly), s, side="right")) - 1
            h = min(max(h, 0), len(poly) - 2)
            if abs(angle_diff(lane_direction(poly, h), hdg)) <= math.pi / 2:
                aligned.append((d, sid, s))
        cands = aligned or cands
    cands.sort()
    return cands


def _paths_from(graph, sid, s_proj, pos, length):
    """All forward paths from segment ``sid`` as (segment ids, clipped polyline)."""
    prefix = []
    need = BACK_MARGIN - s_proj
    cur = sid
    while need > 0 and graph.predecessors[cur]:
        cur = sorted(graph.predecessors[cur])[0]
        if cur in prefix or cur == sid:
            break
        prefix.insert(0, cur)
        need -= _seg_len(graph.segments[cur])
    offset = sum(_seg_len(graph.segments[p]) for p in prefix)
    s_start = max(0.0, offset + s_proj - BACK_MARGIN)

    results = []
    stack = [[sid]]
    while stack:
        path = stack.pop()
        ids = prefix + path
        total = sum(_seg_len(graph.segments[p]) for p in ids)
        succ = [s for s in sorted(graph.successors[path[-1]]) if s not in ids]
        if total - s_start >= length or not succ:
            poly = _join([graph.segments[p] for p in ids])
            results.append((ids, poly))
            continue
        for s in reversed(succ):
            stack.append(path + [s])

    out = []
    for ids, poly in results:
        start = s_start
        while start < offset + s_proj and np.hypot(*(point_at(poly, start) - pos)) > MAX_START_DIST:
            start = min(start + 1.0, offset + s_proj)
        cum = arc_lengths(poly)
        end = min(start + length, cum[-1])
        inner = (cum > start) & (cum < end)
        clipped = np.concatenate([point_at(poly, start)[None], poly[inner], point_at(poly, end)[None]])
        out.append((ids, clipped))
    return out


def _share(a, b):
    sa, sb = set(a), set(b)
    return len(sa & sb) / max(len(sa), len(sb))


def extract_lane_proposals(scene, H=H_DEFAULT, max_N=MAX_N_DEFAULT, length=LOOK_LENGTH):
    """Candidate drivable paths for the target, each resampled to ``H`` nodes.

    Seeds are the (at most two, mutually unconnected) segments nearest the
    target's current position plus their left/right neighbours. From each seed
    the successor graph is expanded depth first, branching at forks, until a
    path covers ``length`` meters (measured from up to 20 m behind the target).
    Near-duplicate paths (> 80% shared segment ids) keep the first; the result
    is ordered by seed distance and truncated to ``max_N``.
    """
    graph = scene.lane_graph
    if not graph.segments:
        raise OffMapError("off-map scene: empty lane graph")
    pos = scene.target_past[-1]
    moving = np.any(np.hypot(*np.diff(scene.target_past, axis=0).T) >= 1e-6)
    hdg = heading(scene.target_past, -1)
    cands = _start_candidates(graph, pos, hdg, moving)

    starts = [cands[0]]
    for c in cands[1:]:
        if len(starts) == 2:
            break
        if any(_connected(graph, c[1], s[1]) for s in starts):
            continue
        starts.append(c)

    seeds = list(starts)
    seen = {s[1] for s in starts}
    for _, sid, _ in starts:
        for nb in (graph.left[sid], graph.right[sid]):
            if nb is not None and nb not in seen:
                s, d = project(graph.segments[nb], pos)
                seeds.append((d, nb, s))
                seen.add(nb)
    seeds.sort(key=lambda c: c[0])

    proposals = []
    for d, sid, s in seeds:
        for ids, poly in _paths_from(graph, sid, s, pos, length):
            if any(_share(ids, p.source_segment_ids) > DEDUP_SHARE for p in proposals):
                continue
            proposals.append(LaneProposal(resample(poly, H), ids, d))
    return proposals[:max_N]
