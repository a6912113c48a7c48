import json
import math

import numpy as np
import pytest

from jalmtp.geometry import arc_lengths, heading, project
from jalmtp.scenario import (
    TEMPLATES,
    TF,
    TP,
    LaneGraph,
    OffMapError,
    Scene,
    SceneError,
    SceneFormatError,
    branch_endpoints,
    extract_lane_proposals,
    from_agent_frame,
    gen_synthetic,
    load_scenes,
    make_congestion_pair,
    make_scene,
    rigid_transform,
    save_scenes,
    to_agent_frame,
)
from jalmtp.scenario.io import scene_to_record
from jalmtp.scenario.proposals import _join
from jalmtp.scenario.synth import allocate

from helpers import straight_scene


def _dist_to_polyline(poly, pts):
    return np.array([project(poly, p)[1] for p in pts])


class TestSceneModel:
    def test_shape_validation(self):
        with pytest.raises(SceneError):
            Scene("x", np.zeros((19, 2)), np.zeros((0, TP, 2)), LaneGraph({}))
        with pytest.raises(SceneError):
            Scene("x", np.zeros((TP, 2)), np.zeros((1, 5, 2)), LaneGraph({}))
        with pytest.raises(SceneError):
            Scene("x", np.zeros((TP, 2)), np.zeros((0, TP, 2)), LaneGraph({}), np.zeros((TF + 1, 2)))

    def test_non_finite_rejected(self):
        past = np.zeros((TP, 2))
        past[3, 1] = np.nan
        with pytest.raises(SceneError):
            Scene("x", past, [], LaneGraph({}))

    def test_graph_consistency(self):
        a = [[0.0, 0.0], [10.0, 0.0]]
        b = [[10.2, 0.0], [20.0, 0.0]]
        LaneGraph({"a": a, "b": b}, {"a": ["b"]}, {"b": ["a"]}).validate()
        with pytest.raises(SceneError):
            LaneGraph({"a": a, "b": b}, {"a": ["b"]}, {}).validate()
        with pytest.raises(SceneError):
            LaneGraph({"a": a, "b": [[12.0, 0.0], [20.0, 0.0]]}, {"a": ["b"]}, {"b": ["a"]}).validate()


class TestProposals:
    def test_single_straight_lane(self):
        props = extract_lane_proposals(straight_scene(), H=50)
        assert len(props) == 1
        assert props[0].nodes.shape == (50, 2)

    def test_fork_gives_two_sharing_prefix(self):
        sc = make_scene("fork", 0, 0)
        props = extract_lane_proposals(sc)
        assert len(props) == 2
        assert props[0].source_segment_ids[0] == props[1].source_segment_ids[0]
        assert np.allclose(props[0].nodes[0], props[1].nodes[0])

    def test_intersection_four(self):
        assert len(extract_lane_proposals(make_scene("intersection", 0, 3))) == 4

    @pytest.mark.parametrize("template", TEMPLATES)
    def test_invariants(self, template):
        for i in range(4):
            sc = make_scene(template, 1, i)
            pos = sc.target_past[-1]
            for p in extract_lane_proposals(sc):
                assert np.hypot(*(p.nodes[0] - pos)) <= 25.0
                src = _join([sc.lane_graph.segments[k] for k in p.source_segment_ids])
                along = np.array([project(src, n)[0] for n in p.nodes])
                gaps = np.diff(along)
                assert np.allclose(gaps, gaps.mean(), rtol=1e-6)

    def test_max_n_truncation(self):
        props = extract_lane_proposals(make_scene("intersection", 0, 3), max_N=2)
        assert len(props) == 2
        assert props[0].start_distance <= props[1].start_distance

    def test_off_map(self):
        sc = straight_scene()
        far = Scene("far", sc.target_past + 500.0, sc.social_pasts, sc.lane_graph, sc.gt_future + 500.0)
        with pytest.raises(OffMapError, match="off-map"):
            extract_lane_proposals(far)
        with pytest.raises(OffMapError):
            extract_lane_proposals(Scene("e", sc.target_past, [], LaneGraph({})))


class TestNormalization:
    def test_origin_and_heading(self):
        for template in TEMPLATES:
            norm = to_agent_frame(make_scene(template, 2, 0))
            s = norm.scene
            assert np.allclose(s.target_past[-1], 0.0, atol=1e-9)
            assert abs(heading(s.target_past, -1)) < 1e-9

    def test_round_trip(self):
        sc = make_scene("intersection", 0, 1)
        back = from_agent_frame(to_agent_frame(sc))
        assert np.abs(back.target_past - sc.target_past).max() < 1e-9
        assert np.abs(back.gt_future - sc.gt_future).max() < 1e-9
        assert np.abs(back.social_pasts - sc.social_pasts).max() < 1e-9
        for k, v in sc.lane_graph.segments.items():
            assert np.abs(back.lane_graph.segments[k] - v).max() < 1e-9

    def test_identity_when_normalized(self):
        norm = to_agent_frame(straight_scene())
        assert np.allclose(norm.origin, 0.0) and norm.rotation == 0.0

    def test_heading_minus_half_pi(self):
        sc = rigid_transform(straight_scene(), -math.pi / 2, (0.0, 0.0))
        assert to_agent_frame(sc).rotation == pytest.approx(math.pi / 2)


class TestSynthetic:
    def test_deterministic_files(self, tmp_path):
        mix = {t: 1 for t in TEMPLATES}
        save_scenes(tmp_path / "a.jsonl", gen_synthetic(mix, 10, 5))
        save_scenes(tmp_path / "b.jsonl", gen_synthetic(mix, 10, 5))
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_unknown_template(self):
        with pytest.raises(SceneError):
            gen_synthetic({"roundabout": 1}, 3, 0)
        with pytest.raises(SceneError):
            make_scene("roundabout", 0)

    def test_allocation(self):
        assert allocate({"straight": 1, "fork": 1}, 5) == {"straight": 3, "fork": 2}
        assert sum(allocate({"curve": 2, "congestion": 1}, 7).values()) == 7

    def test_straight_gt_near_centerline(self):
        for i in range(10):
            sc = make_scene("straight", 3, i)
            lane = extract_lane_proposals(sc)[0].nodes
            assert _dist_to_polyline(lane, sc.gt_future).max() <= 0.3

    @pytest.mark.parametrize("template", TEMPLATES)
    def test_gt_stays_in_corridor(self, template):
        for i in range(6):
            sc = make_scene(template, 4, i)
            props = extract_lane_proposals(sc)
            nodes = np.concatenate([p.nodes for p in props])
            d = np.hypot(*(nodes[None] - sc.gt_future[:, None]).transpose(2, 0, 1)).min(axis=1)
            assert d.max() <= 1.5

    def test_fork_branches_both_occur(self):
        ends = set()
        for i in range(20):
            sc = to_agent_frame(make_scene("fork", 0, i)).scene
            ends.add(bool(sc.gt_future[-1, 1] > 0))
        assert ends == {True, False}

    def test_branch_endpoints_match_gt(self):
        sc = make_scene("fork", 0, 2)
        ends = branch_endpoints(sc, extract_lane_proposals(sc))
        assert ends.shape == (2, 2)
        assert np.min(np.hypot(*(ends - sc.gt_future[-1]).T)) < 1.0

    def test_congestion_pair(self):
        jam, free = make_congestion_pair(0, 1)
        assert np.array_equal(jam.target_past, free.target_past)
        assert jam.num_agents == free.num_agents + 1
        v_jam = np.hypot(*np.diff(jam.gt_future[-11:], axis=0).T).mean()
        v_free = np.hypot(*np.diff(free.gt_future[-11:], axis=0).T).mean()
        assert v_jam < 0.7 * v_free


class TestSceneFiles:
    def test_round_trip(self, tmp_path):
        scenes = gen_synthetic({t: 1 for t in TEMPLATES}, 5, 0) + [straight_scene(with_gt=False)]
        save_scenes(tmp_path / "s.jsonl", scenes)
        back = load_scenes(tmp_path / "s.jsonl")
        assert [s.scene_id for s in back] == [s.scene_id for s in scenes]
        for a, b in zip(scenes, back):
            assert scene_to_record(a) == scene_to_record(b)

    def test_empty_file(self, tmp_path):
        (tmp_path / "e.jsonl").write_text("")
        assert load_scenes(tmp_path / "e.jsonl") == []

    def test_short_past_reports_line(self, tmp_path):
        rec = scene_to_record(straight_scene())
        good = json.dumps(rec)
        rec["target_past"] = rec["target_past"][:19]
        bad = json.dumps(rec)
        (tmp_path / "b.jsonl").write_text(good + "\n" + bad + "\n")
        with pytest.raises(SceneFormatError) as info:
            load_scenes(tmp_path / "b.jsonl")
        assert info.value.line == 2 and ":2:" in str(info.value)

    def test_missing_field_and_unknown_field(self, tmp_path):
        rec = scene_to_record(straight_scene())
        rec["extra"] = 1
        (tmp_path / "u.jsonl").write_text(json.dumps(rec) + "\n")
        assert len(load_scenes(tmp_path / "u.jsonl")) == 1
        del rec["lanes"]
        (tmp_path / "m.jsonl").write_text(json.dumps(rec) + "\n")
        with pytest.raises(SceneFormatError):
            load_scenes(tmp_path / "m.jsonl")

    def test_arc_length_helper_sanity(self):
        assert arc_lengths(np.array([[0.0, 0.0], [3.0, 4.0]]))[-1] == 5.0
