import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jalmtp import kernels
from jalmtp.kernels import _numpy

compiled = pytest.mark.skipif(kernels._ckernels is None, reason="compiled kernels not built")


def _attn_inputs(rng, b, w, d):
    mask = rng.random((b, w)) < 0.7
    mask[:, 0] = True
    return rng.standard_normal((b, d)), rng.standard_normal((b, w, d)), rng.standard_normal((b, w, d)), mask


class TestBackendSelection:
    def test_default_prefers_compiled(self):
        expected = "compiled" if kernels._ckernels is not None else "numpy"
        assert kernels.BACKEND == expected
        assert kernels.available_backends()[0] == expected

    def test_switch_and_restore(self):
        before = kernels.BACKEND
        try:
            kernels.use_backend("numpy")
            assert kernels.nearest_nodes is _numpy.nearest_nodes
        finally:
            kernels.use_backend(before)

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            kernels.use_backend("gpu")


class TestNumpyReference:
    def test_nearest_tie_goes_to_lower_index(self):
        nodes = np.array([[[0.0, 0.0], [2.0, 0.0], [1.0, 5.0]]])
        idx, dist = _numpy.nearest_nodes(nodes, np.array([[1.0, 0.0]]))
        assert idx[0] == 0 and dist[0] == 1.0

    def test_rollout_min_dist_empty(self):
        assert _numpy.rollout_node_min_dist(np.zeros((4, 2)), np.zeros((0, 3, 2))).shape == (4, 0)

    def test_attention_masked_slots_zero(self):
        rng = np.random.default_rng(0)
        q, k, v, mask = _attn_inputs(rng, 5, 6, 4)
        _, w = _numpy.attention_forward(q, k, v, mask)
        assert np.all(w[~mask] == 0.0)
        assert np.allclose(w.sum(axis=1), 1.0, atol=1e-12)

    def test_gru_gates_limits(self):
        d = 3
        h = np.array([[0.5, -0.2, 0.1]])
        gx = np.zeros((1, 3 * d))
        gx[:, d:2 * d] = 50.0  # update gate saturates at 1: state carried over
        h_new, *_ = _numpy.gru_gates_forward(gx, np.zeros((1, 3 * d)), h)
        assert np.allclose(h_new, h, atol=1e-12)


@compiled
class TestParity:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(2, 30), st.integers(0, 2**31 - 1))
    def test_nearest_nodes(self, b, h, seed):
        rng = np.random.default_rng(seed)
        nodes = rng.integers(-5, 5, size=(b, h, 2)).astype(float)  # integer grid forces ties
        pts = rng.integers(-5, 5, size=(b, 2)).astype(float)
        i1, d1 = kernels._ckernels.nearest_nodes(nodes, pts)
        i2, d2 = _numpy.nearest_nodes(nodes, pts)
        assert np.array_equal(i1, i2)
        assert np.allclose(d1, d2, rtol=0, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 20), st.integers(0, 6), st.integers(1, 30), st.integers(0, 2**31 - 1))
    def test_rollout_node_min_dist(self, h, m, t, seed):
        rng = np.random.default_rng(seed)
        nodes = rng.standard_normal((h, 2)) * 10
        roll = rng.standard_normal((m, t, 2)) * 10
        assert np.allclose(kernels._ckernels.rollout_node_min_dist(nodes, roll),
                           _numpy.rollout_node_min_dist(nodes, roll), rtol=0, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 12), st.integers(1, 16), st.integers(0, 2**31 - 1))
    def test_attention(self, b, w, d, seed):
        rng = np.random.default_rng(seed)
        q, k, v, mask = _attn_inputs(rng, b, w, d)
        o1, w1 = kernels._ckernels.attention_forward(q, k, v, mask)
        o2, w2 = _numpy.attention_forward(q, k, v, mask)
        assert np.allclose(o1, o2, atol=1e-12) and np.allclose(w1, w2, atol=1e-12)
        g = rng.standard_normal((b, d))
        for a1, a2 in zip(kernels._ckernels.attention_backward(g, q, k, v, w2),
                          _numpy.attention_backward(g, q, k, v, w2)):
            assert np.allclose(a1, a2, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 16), st.integers(0, 2**31 - 1))
    def test_gru_gates(self, b, d, seed):
        rng = np.random.default_rng(seed)
        gx, gh = rng.standard_normal((b, 3 * d)) * 3, rng.standard_normal((b, 3 * d)) * 3
        h = rng.standard_normal((b, d))
        f1 = kernels._ckernels.gru_gates_forward(gx, gh, h)
        f2 = _numpy.gru_gates_forward(gx, gh, h)
        for a1, a2 in zip(f1, f2):
            assert np.allclose(a1, a2, atol=1e-12)
        g = rng.standard_normal((b, d))
        _, r, z, n = f2
        for a1, a2 in zip(kernels._ckernels.gru_gates_backward(g, h, r, z, n, gh[:, 2 * d:].copy()),
                          _numpy.gru_gates_backward(g, h, r, z, n, gh[:, 2 * d:])):
            assert np.allclose(a1, a2, atol=1e-12)
