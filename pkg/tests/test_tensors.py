import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lacvoid import NonFiniteError, NormGranularity, ShapeError, l2_norm, layer_norm_pre, matmul

B, E, T = NormGranularity.BATCH, NormGranularity.EXAMPLE, NormGranularity.TOKEN


def loop_norm(h: np.ndarray, granularity: NormGranularity) -> np.ndarray:
    """Element-wise loop oracle, float64 accumulation."""
    b, l, d = h.shape
    if granularity is B:
        s = 0.0
        for i in range(b):
            for j in range(l):
                for k in range(d):
                    s += float(h[i, j, k]) ** 2
        return np.array([math.sqrt(s)], dtype=np.float32)
    if granularity is E:
        out = np.zeros((b, 1), dtype=np.float32)
        for i in range(b):
            s = 0.0
            for j in range(l):
                for k in range(d):
                    s += float(h[i, j, k]) ** 2
            out[i, 0] = math.sqrt(s)
        return out
    out = np.zeros((b, l, 1), dtype=np.float32)
    for i in range(b):
        for j in range(l):
            s = 0.0
            for k in range(d):
                s += float(h[i, j, k]) ** 2
            out[i, j, 0] = math.sqrt(s)
    return out


class TestL2Norm:
    def test_per_token_ones(self):
        h = np.ones((1, 1, 4), dtype=np.float32)
        assert np.array_equal(l2_norm(h, T), np.array([[[2.0]]], dtype=np.float32))

    def test_per_batch_zeros(self):
        h = np.zeros((2, 3, 8), dtype=np.float32)
        assert np.array_equal(l2_norm(h, B), np.array([0.0], dtype=np.float32))

    def test_per_batch_matches_loop_oracle(self, rng42):
        h = rng42.uniform(-2, 2, size=(2, 3, 4)).astype(np.float32)
        got = l2_norm(h, B)
        assert got.shape == (1,)
        np.testing.assert_allclose(got, loop_norm(h, B), rtol=1e-6)

    @pytest.mark.parametrize("granularity,shape", [(B, (1,)), (E, (2, 1)), (T, (2, 5, 1))])
    def test_output_shapes(self, rng42, granularity, shape):
        h = rng42.normal(size=(2, 5, 3)).astype(np.float32)
        got = l2_norm(h, granularity)
        assert got.shape == shape
        np.testing.assert_allclose(got, loop_norm(h, granularity), rtol=1e-6)

    def test_rank_error(self):
        with pytest.raises(ShapeError):
            l2_norm(np.zeros((2, 3), dtype=np.float32), T)

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_non_finite_error(self, bad):
        h = np.ones((1, 2, 2), dtype=np.float32)
        h[0, 1, 0] = bad
        with pytest.raises(NonFiniteError):
            l2_norm(h, T)

    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_granularity_consistency(self, seed):
        rng = np.random.default_rng(seed)
        b, l, d = rng.integers(1, 5), rng.integers(1, 7), rng.integers(1, 9)
        h = rng.uniform(-3, 3, size=(b, l, d)).astype(np.float32)
        batch_sq = float(l2_norm(h, B)[0]) ** 2
        ex = l2_norm(h, E).astype(np.float64)
        tok = l2_norm(h, T).astype(np.float64)
        assert batch_sq == pytest.approx(float((ex**2).sum()), rel=1e-5, abs=1e-8)
        for i in range(b):
            assert float(ex[i, 0] ** 2) == pytest.approx(float((tok[i] ** 2).sum()), rel=1e-5, abs=1e-8)

    @given(seed=st.integers(0, 2**31 - 1), c=st.floats(-4.0, 4.0))
    @settings(max_examples=40, deadline=None)
    def test_scale_equivariance(self, seed, c):
        rng = np.random.default_rng(seed)
        h = rng.uniform(-2, 2, size=(2, 3, 4)).astype(np.float32)
        for g in (B, E, T):
            scaled = l2_norm((np.float32(c) * h), g)
            np.testing.assert_allclose(scaled, abs(c) * l2_norm(h, g), rtol=1e-5, atol=1e-6)

    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_non_negativity(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.normal(size=(2, 4, 3)).astype(np.float32)
        for g in (B, E, T):
            assert (l2_norm(h, g) >= 0).all()


class TestMatmul:
    def test_identity(self, rng42):
        m = rng42.normal(size=(3, 3)).astype(np.float32)
        assert np.array_equal(matmul(np.eye(3, dtype=np.float32), m), m)

    def test_hand_computed(self):
        got = matmul([[1, 2], [3, 4]], [[0], [1]])
        assert np.array_equal(got, np.array([[2], [4]], dtype=np.float32))

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(7)
        a = rng.uniform(-1, 1, size=(4, 5)).astype(np.float32)
        b = rng.uniform(-1, 1, size=(5, 6)).astype(np.float32)
        expect = np.zeros((4, 6))
        for i in range(4):
            for j in range(6):
                for k in range(5):
                    expect[i, j] += float(a[i, k]) * float(b[k, j])
        assert np.abs(matmul(a, b) - expect).max() < 1e-5

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.zeros((2, 3), np.float32), np.zeros((2, 3), np.float32))


class TestLayerNormPre:
    def test_constant_vector_unit_rms(self):
        h = np.full((1, 1, 8), 3.0, dtype=np.float32)
        out = layer_norm_pre(h, np.ones(8, dtype=np.float32))
        rms = math.sqrt(float((out.astype(np.float64) ** 2).mean()))
        assert rms == pytest.approx(1.0, abs=1e-6)

    def test_zeros_stay_zero(self):
        h = np.zeros((1, 2, 4), dtype=np.float32)
        assert np.array_equal(layer_norm_pre(h, np.ones(4, dtype=np.float32)), h)

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(3)
        h = rng.uniform(-2, 2, size=6).astype(np.float32)
        gain = rng.uniform(0.5, 1.5, size=6).astype(np.float32)
        eps = 1e-5
        ms = sum(float(x) ** 2 for x in h) / 6
        expect = np.array([float(x) / math.sqrt(ms + eps) * float(g) for x, g in zip(h, gain)])
        got = layer_norm_pre(h.reshape(1, 1, 6), gain)[0, 0]
        assert np.abs(got - expect).max() < 1e-6

    def test_gain_length_mismatch(self):
        with pytest.raises(ShapeError):
            layer_norm_pre(np.zeros((1, 1, 4), np.float32), np.ones(3, np.float32))
