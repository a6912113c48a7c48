import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jalmtp.autodiff import Tensor, ops
from jalmtp.model import ParamStore
from jalmtp.model.selectors import (
    LaneSelector,
    TrajSelector,
    ambiguous,
    combine_and_pick,
    lane_distance,
    lane_select,
    make_labels,
    regression_loss,
    scores,
    total_loss,
    traj_select,
)

D, TF = 8, 30


def brute_pick(lane_p, traj_p, k):
    cands = [(-lane_p[i] * traj_p[i, j], i, j) for i in range(len(lane_p)) for j in range(traj_p.shape[1])]
    cands.sort()
    return [(i, j) for _, i, j in cands[:k]]


class TestLaneSelector:
    def test_identical_hidden_uniform(self):
        sel = LaneSelector(ParamStore(0), D)
        h = Tensor(np.tile(np.random.default_rng(0).standard_normal(D), (4, 1)))
        assert np.allclose(lane_select(sel.logits(h).data), 0.25, atol=1e-12)

    def test_single_lane(self):
        assert lane_select([3.7]).tolist() == [1.0]

    def test_permutation(self):
        sel = LaneSelector(ParamStore(1), D)
        h = np.random.default_rng(1).standard_normal((5, D))
        perm = np.array([4, 2, 0, 3, 1])
        a = lane_select(sel.logits(Tensor(h)).data)
        b = lane_select(sel.logits(Tensor(h[perm])).data)
        assert np.allclose(a[perm], b, atol=1e-15)


class TestTrajSelector:
    def test_identical_trajectories_uniform_and_rows_normalized(self):
        sel = TrajSelector(ParamStore(2), D, TF)
        rng = np.random.default_rng(2)
        off = np.tile(rng.standard_normal((1, 1, TF, 2)), (2, 6, 1, 1))
        p = traj_select(sel.logits(Tensor(off), Tensor(rng.standard_normal((2, D)))).data)
        assert np.allclose(p, 1 / 6, atol=1e-12)
        off = rng.standard_normal((2, 6, TF, 2))
        p = traj_select(sel.logits(Tensor(off), Tensor(rng.standard_normal((2, D)))).data)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_head_permutation(self):
        sel = TrajSelector(ParamStore(3), D, TF)
        rng = np.random.default_rng(3)
        off, h = rng.standard_normal((1, 6, TF, 2)), Tensor(rng.standard_normal((1, D)))
        perm = np.array([5, 1, 3, 0, 2, 4])
        a = sel.logits(Tensor(off), h).data
        b = sel.logits(Tensor(off[:, perm]), h).data
        assert np.allclose(a[:, perm], b, atol=1e-14)


class TestCombineAndPick:
    def test_single_lane_takes_best_heads(self):
        tp = np.array([[0.1, 0.4, 0.05, 0.3, 0.15]])
        pick, _ = combine_and_pick([1.0], tp, 3)
        assert pick.head.tolist() == [1, 3, 4]
        assert np.allclose(pick.probs, np.array([0.4, 0.3, 0.15]) / 0.85)

    def test_dominant_lane(self):
        rng = np.random.default_rng(4)
        tp = traj_select(rng.standard_normal((3, 6)))
        pick, _ = combine_and_pick([1e-9, 1 - 2e-9, 1e-9], tp, 6)
        assert set(pick.lane.tolist()) == {1}

    def test_ties_lower_lane_then_head(self):
        pick, _ = combine_and_pick([0.5, 0.5], np.full((2, 3), 1 / 3), 4)
        assert list(zip(pick.lane, pick.head)) == [(0, 0), (0, 1), (0, 2), (1, 0)]

    def test_short_candidates_flagged(self):
        pick, _ = combine_and_pick([1.0], np.full((1, 3), 1 / 3), 6)
        assert pick.short and len(pick.probs) == 3
        assert abs(pick.probs.sum() - 1.0) < 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 8), st.integers(1, 12), st.integers(0, 2**31 - 1))
    def test_matches_sort_oracle(self, n, kk, k, seed):
        rng = np.random.default_rng(seed)
        lp, tp = lane_select(rng.standard_normal(n)), traj_select(rng.standard_normal((n, kk)))
        pick, combined = combine_and_pick(lp, tp, k)
        assert list(zip(pick.lane.tolist(), pick.head.tolist())) == brute_pick(lp, tp, k)
        assert np.array_equal(combined, lp[:, None] * tp)
        assert np.all(pick.probs >= 0) and abs(pick.probs.sum() - 1.0) < 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-3, 1e3), st.integers(0, 2**31 - 1))
    def test_argmax_invariance_under_scaling(self, c, seed):
        rng = np.random.default_rng(seed)
        lp, tp = lane_select(rng.standard_normal(3)), traj_select(rng.standard_normal((3, 6)))
        a, _ = combine_and_pick(lp, tp, 6)
        b, _ = combine_and_pick(lp * c, tp, 6)
        assert set(zip(a.lane, a.head)) == set(zip(b.lane, b.head))
        assert np.allclose(a.probs, b.probs, rtol=1e-12)

    def test_scores_wrapper(self):
        rng = np.random.default_rng(5)
        ss, pick = scores(rng.standard_normal(3), rng.standard_normal((3, 6)), 6)
        assert ss.combined.shape == (3, 6)
        assert abs(ss.final_probs.sum() - 1.0) < 1e-9 and ss.final_probs is pick.probs


class TestLabels:
    gt = np.stack([np.arange(1, 31, dtype=float), np.zeros(30)], axis=1)

    def test_on_centerline_label_one_hot(self):
        on = np.stack([np.linspace(0, 40, 81), np.zeros(81)], axis=1)
        lbl = make_labels([on, on + [0.0, 5.0]], [self.gt], self.gt)
        assert lbl.lane[0] == 1.0 and lbl.lane[1] < 1e-300
        assert lane_distance(on + [0.0, 5.0], self.gt) == pytest.approx(465 * 5.0)

    def test_d1_weights(self):
        lane = np.stack([np.linspace(-10, 50, 601), np.ones(601)], axis=1)
        assert lane_distance(lane, self.gt) == pytest.approx(465.0)

    def test_equidistant_uniform(self):
        a = np.stack([np.linspace(0, 40, 81), np.full(81, 2.0)], axis=1)
        lbl = make_labels([a, a * [1, -1]], [self.gt + 1.0, self.gt - 1.0], self.gt)
        assert np.allclose(lbl.lane, 0.5) and np.allclose(lbl.traj, 0.5)
        assert ambiguous(lbl.lane) and not ambiguous(np.array([1.0]))

    def test_exact_trajectory_gets_max_label(self):
        rng = np.random.default_rng(6)
        trajs = [self.gt + rng.standard_normal((30, 2)) for _ in range(4)] + [self.gt]
        lbl = make_labels([self.gt], trajs, self.gt)
        assert lbl.traj.argmax() == 4 and abs(lbl.traj.sum() - 1) < 1e-9


class TestLoss:
    gt = np.stack([np.arange(1, 31, dtype=float), np.zeros(30)], axis=1)

    def test_winner_take_all(self):
        trajs = np.stack([self.gt, self.gt + [0.0, 1.0]])[None]
        assert regression_loss(Tensor(trajs), self.gt[None]).data.tolist() == [0.0]
        assert regression_loss(Tensor(trajs[:, 1:]), self.gt[None]).data[0] == pytest.approx(1.0)

    def test_perfect_scores_give_label_entropy(self):
        trajs = Tensor(np.stack([self.gt, self.gt + 3.0])[None])
        lane_lbl = np.array([[0.7, 0.3]])
        traj_lbl = np.array([[0.9, 0.1]])
        lane_logits = Tensor(np.log(lane_lbl))
        traj_logits = Tensor(np.log(traj_lbl))
        total, parts = total_loss(trajs, self.gt[None], lane_logits, lane_lbl, np.ones((1, 2), bool),
                                  traj_logits, traj_lbl)
        ent = lambda p: -(p * np.log(p)).sum()
        assert parts["reg"] == 0.0
        assert parts["lane_ce"] == pytest.approx(ent(lane_lbl))
        assert parts["traj_ce"] == pytest.approx(ent(traj_lbl))
        assert total.item() == pytest.approx(ent(lane_lbl) + ent(traj_lbl))

    def test_zero_lambdas_pure_regression(self):
        rng = np.random.default_rng(7)
        trajs = Tensor(self.gt[None, None] + rng.standard_normal((2, 3, 30, 2)))
        gt = np.stack([self.gt, self.gt])
        total, _ = total_loss(trajs, gt, Tensor(rng.standard_normal((2, 4))), np.full((2, 4), 0.25),
                              np.ones((2, 4), bool), Tensor(rng.standard_normal((2, 3))),
                              np.full((2, 3), 1 / 3), 0.0, 0.0)
        assert total.item() == pytest.approx(ops.mean(regression_loss(trajs, gt)).item())

    def test_padding_lanes_ignored(self):
        lbl = np.array([[1.0, 0.0, 0.0]])
        mask = np.array([[True, True, False]])
        a = ops.softmax_cross_entropy(Tensor(np.array([[1.0, 0.0, 0.0]])), lbl, mask=mask).item()
        b = ops.softmax_cross_entropy(Tensor(np.array([[1.0, 0.0, 50.0]])), lbl, mask=mask).item()
        assert a == b == pytest.approx(math.log(1 + math.exp(-1)))
