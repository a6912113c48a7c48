import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jalmtp.metrics import (
    EvalReport,
    MetricsError,
    horizon_curves,
    horizon_errors,
    min_ade_fde,
    miss_rate,
    prob_metrics,
    scene_record,
)

GT = np.stack([np.arange(1, 31, dtype=float), np.zeros(30)], axis=1)


def oracle(preds, gt):
    ades, fdes = [], []
    for p in preds:
        errs = [math.hypot(*(p[t] - gt[t])) for t in range(len(gt))]
        ades.append(sum(errs) / len(errs))
        fdes.append(errs[-1])
    k = min(range(len(fdes)), key=lambda i: (fdes[i], i))
    return min(ades), fdes[k], k


class TestMinAdeFde:
    def test_exact_prediction(self):
        preds = np.stack([GT + 1.0, GT, GT - 2.0])
        assert min_ade_fde(preds, GT) == (0.0, 0.0, 1)

    def test_constant_offset(self):
        ade, fde, k = min_ade_fde((GT + [0.0, 1.0])[None], GT)
        assert ade == pytest.approx(1.0) and fde == pytest.approx(1.0) and k == 0

    def test_mins_are_independent(self):
        a = GT.copy()
        a[-1] += [5.0, 0.0]  # good ADE, bad FDE
        b = GT + [0.0, 1.0]
        ade, fde, k = min_ade_fde(np.stack([a, b]), GT)
        assert ade == pytest.approx(5.0 / 30) and fde == pytest.approx(1.0) and k == 1

    @settings(max_examples=1000, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**31 - 1))
    def test_matches_exhaustive_oracle(self, k, seed):
        rng = np.random.default_rng(seed)
        preds = GT + rng.standard_normal((k, 30, 2)) * 2
        ade, fde, best = min_ade_fde(preds, GT)
        o_ade, o_fde, o_best = oracle(preds, GT)
        assert ade == pytest.approx(o_ade, abs=1e-12) and fde == pytest.approx(o_fde, abs=1e-12)
        assert best == o_best

    def test_nested_candidates_never_worse(self):
        rng = np.random.default_rng(1)
        preds = GT + rng.standard_normal((6, 30, 2))
        prev = (np.inf, np.inf)
        for k in range(1, 7):
            ade, fde, _ = min_ade_fde(preds[:k], GT)
            assert ade <= prev[0] and fde <= prev[1]
            prev = (ade, fde)

    def test_rigid_invariance(self):
        rng = np.random.default_rng(2)
        preds = GT + rng.standard_normal((6, 30, 2))
        c, s = math.cos(0.7), math.sin(0.7)
        rot = np.array([[c, -s], [s, c]])
        move = lambda x: x @ rot.T + [13.0, -4.0]
        a = min_ade_fde(preds, GT)
        b = min_ade_fde(move(preds), move(GT))
        assert a[2] == b[2] and np.allclose(a[:2], b[:2], atol=1e-12)

    def test_shape_errors(self):
        with pytest.raises(MetricsError):
            min_ade_fde(np.zeros((0, 30, 2)), GT)
        with pytest.raises(MetricsError):
            min_ade_fde(np.zeros((2, 29, 2)), GT)


class TestMissRate:
    def test_examples(self):
        assert miss_rate([0.0, 0.0]) == 0.0
        assert miss_rate([10.0, 10.0]) == 1.0
        assert miss_rate([2.0]) == 0.0
        assert miss_rate([2.0 + 1e-12, 1.0]) == 0.5

    def test_empty(self):
        with pytest.raises(MetricsError):
            miss_rate([])


class TestProbMetrics:
    def test_perfect(self):
        assert prob_metrics(GT[None], [1.0], GT) == (0.0, 0.0, 0.0, 0.0, False)

    def test_uniform_brier(self):
        preds = np.stack([GT + [0.0, 1.0]] + [GT + [0.0, 5.0]] * 5)
        pa, pf, ba, bf, pm = prob_metrics(preds, np.full(6, 1 / 6), GT)
        assert bf == pytest.approx(1 + (5 / 6) ** 2)
        assert pf == pytest.approx(1 + math.log(6))
        assert pm  # 1 + ln 6 > 2

    def test_penalty_clamped(self):
        preds = np.stack([GT, GT + 9.0])
        pa, pf, *_ = prob_metrics(preds, [1e-9, 1 - 1e-9], GT)
        assert pf == pytest.approx(-math.log(0.05))

    def test_mass_toward_best_lowers_brier(self):
        preds = np.stack([GT + 0.5, GT + 3.0, GT + 4.0])
        last = np.inf
        for p in (0.2, 0.4, 0.6, 0.9):
            bf = prob_metrics(preds, [p, (1 - p) / 2, (1 - p) / 2], GT)[3]
            assert bf < last
            last = bf

    def test_unnormalized_rejected(self):
        with pytest.raises(MetricsError):
            prob_metrics(np.stack([GT, GT]), [0.5, 0.6], GT)
        with pytest.raises(MetricsError):
            prob_metrics(np.stack([GT, GT]), [1.5, -0.5], GT)


class TestHorizon:
    def test_last_point_is_full_horizon(self):
        rng = np.random.default_rng(3)
        preds = GT + rng.standard_normal((6, 30, 2))
        ade, fde = horizon_errors(preds, GT)
        full = min_ade_fde(preds, GT)
        assert len(ade) == len(fde) == 30
        assert ade[-1] == pytest.approx(full[0]) and fde[-1] == pytest.approx(full[1])

    def test_truncation_oracle(self):
        rng = np.random.default_rng(4)
        preds = GT + rng.standard_normal((6, 30, 2))
        ade, fde = horizon_errors(preds, GT)
        for t in (1, 7, 18):
            o_ade, _, _ = oracle(preds[:, :t], GT[:t])
            o_fde = min(math.hypot(*(p[t - 1] - GT[t - 1])) for p in preds)
            assert ade[t - 1] == pytest.approx(o_ade) and fde[t - 1] == pytest.approx(o_fde)

    def test_curves_mean_of_scenes(self):
        recs = [scene_record(str(i), GT[None] + i, [1.0], GT) for i in range(3)]
        ha, hf = horizon_curves(recs)
        assert np.allclose(hf, math.hypot(1, 1))
        with pytest.raises(MetricsError):
            horizon_curves([])


class TestReport:
    def test_aggregates_and_files(self, tmp_path):
        recs = [scene_record("a", GT[None], [1.0], GT), scene_record("b", (GT + [0, 3.0])[None], [1.0], GT)]
        rep = EvalReport(recs, [{"scene_id": "c", "error": "off-map"}])
        agg = rep.aggregates()
        assert agg["minADE"] == pytest.approx(1.5) and agg["MR"] == 0.5 and agg["failed"] == 1
        assert len(agg["horizon_minFDE"]) == 30
        rep.write(tmp_path / "r.txt", k=1)
        text = (tmp_path / "r.txt").read_text()
        assert "clamped" in text and "minFDE" in text
        data = json.loads((tmp_path / "r.txt.json").read_text())
        assert data["aggregates"]["scenes"] == 2 and data["scenes"][1]["scene_id"] == "b"

    def test_empty_report(self):
        with pytest.raises(MetricsError):
            EvalReport([]).aggregates()
