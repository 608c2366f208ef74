import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from obx.angle import (
    ApeConfig, ApeEmbedding, UndecodableEmbeddingError, ape_decode, ape_decode_array,
    ape_encode, ape_encode_array, aspect_factor, smooth_l1,
)
from obx.geometry import angle_distance

from conftest import angles


class TestEncode:
    def test_zero_angle_saturated(self):
        e = ape_encode(0.0, 10, 2)
        assert e.u1 == pytest.approx((1, 0)) and e.u2 == pytest.approx((1, 0))

    def test_square(self):
        e = ape_encode(math.pi / 6, 4, 4)
        assert e.u1 == pytest.approx((-0.5, math.sqrt(3) / 2), abs=1e-12)
        assert e.u2 == (0.0, 0.0)

    def test_partial_factor(self):
        e = ape_encode(0.0, 4.4, 4)
        assert e.u2 == pytest.approx((0.2, 0.0), abs=1e-12)

    @pytest.mark.parametrize("args", [(0, 2, 4), (0, 4, 0), (math.nan, 4, 2), (0, math.inf, 2)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            ape_encode(*args)

    @given(angles, st.floats(1, 100))
    def test_seam_continuity(self, theta, h):
        a = ape_encode(theta, 3 * h, h).as_array()
        b = ape_encode(theta + math.pi, 3 * h, h).as_array()
        assert np.all(np.abs(a - b) < 1e-12)

    @given(angles, st.floats(1, 50), st.floats(1.0, 4.0), st.floats(1.0, 4.0))
    def test_aspect_monotone(self, theta, h, r1, r2):
        lo, hi = sorted((r1, r2))
        n_lo = math.hypot(*ape_encode(theta, lo * h, h).u2)
        n_hi = math.hypot(*ape_encode(theta, hi * h, h).u2)
        assert n_lo <= n_hi + 1e-12
        assert n_hi <= 1.0 + 1e-12

    def test_array_matches_scalar(self):
        rng = np.random.default_rng(0)
        t = rng.uniform(0, math.pi, 50)
        h = rng.uniform(1, 10, 50)
        w = h * rng.uniform(1, 3, 50)
        arr = ape_encode_array(t, w, h)
        for i in range(50):
            assert arr[i] == pytest.approx(ape_encode(t[i], w[i], h[i]).as_array(), abs=1e-15)

    def test_lambda(self):
        assert aspect_factor(4.4, 4.0, ApeConfig(lambda_=0.1)) == 1.0
        with pytest.raises(ValueError):
            ApeConfig(lambda_=0)


class TestDecode:
    def test_examples(self):
        assert ape_decode(ApeEmbedding((1, 0), (1, 0))) == 0.0
        assert ape_decode(ApeEmbedding((1, 0), (-1, 0))) == pytest.approx(math.pi / 2)
        assert ape_decode(ApeEmbedding((0, 1), (0, 0))) == pytest.approx(math.radians(22.5))

    def test_zero_u1(self):
        with pytest.raises(UndecodableEmbeddingError):
            ape_decode(ApeEmbedding((0, 0), (1, 0)))
        assert math.isnan(ape_decode_array(np.zeros(4)))

    def test_clamps(self):
        assert ape_decode(ApeEmbedding((3, 0), (5, 0))) == 0.0

    @given(angles, st.floats(1, 100), st.floats(1.5, 10))
    def test_roundtrip_saturated(self, theta, h, r):
        got = ape_decode(ape_encode(theta, r * h, h))
        assert angle_distance(got, theta) < 1e-6

    @given(angles, st.floats(1, 100))
    def test_roundtrip_square(self, theta, h):
        got = ape_decode(ape_encode(theta, h, h))
        assert angle_distance(got, theta, math.pi / 2) < 1e-6

    @given(angles, st.floats(1, 100), st.floats(1.1, 10))
    def test_roundtrip_partial_factor(self, theta, h, r):
        got = ape_decode(ape_encode(theta, r * h, h))
        assert angle_distance(got, theta) < 1e-6

    def test_array_matches_scalar(self):
        rng = np.random.default_rng(1)
        emb = rng.uniform(-1, 1, (500, 4))
        arr = ape_decode_array(emb)
        for e, v in zip(emb, arr):
            assert v == pytest.approx(ape_decode(ApeEmbedding.from_array(e)), abs=1e-12)

    def test_noise_robustness(self):
        rng = np.random.default_rng(2)
        n = 10_000
        theta = rng.uniform(0, math.pi, n)
        h = rng.uniform(1, 50, n)
        emb = ape_encode_array(theta, h * rng.uniform(1.5, 6, n), h)
        noisy = emb + rng.uniform(-0.05, 0.05, emb.shape)
        got = ape_decode_array(noisy)
        err = np.abs((got - theta + math.pi / 2) % math.pi - math.pi / 2)
        assert err.max() < math.radians(2)


class TestSmoothL1:
    @pytest.mark.parametrize("d,v", [(0, 0), (0.5, 0.125), (2, 1.5), (-2, 1.5), (1, 0.5)])
    def test_values(self, d, v):
        assert smooth_l1(d, 0) == pytest.approx(v)

    def test_continuous_derivative(self):
        eps = 1e-7
        for x in (1.0, -1.0):
            left = (smooth_l1(x - eps, 0) - smooth_l1(x - 2 * eps, 0)) / eps
            right = (smooth_l1(x + 2 * eps, 0) - smooth_l1(x + eps, 0)) / eps
            assert left == pytest.approx(right, abs=1e-5)
            assert abs(left) == pytest.approx(1.0, abs=1e-5)
        assert smooth_l1(1 - 1e-12, 0) == pytest.approx(smooth_l1(1 + 1e-12, 0), abs=1e-11)

    def test_array(self):
        out = smooth_l1(np.array([0.0, 0.5, 2.0]), np.zeros(3))
        assert out == pytest.approx([0, 0.125, 1.5])
