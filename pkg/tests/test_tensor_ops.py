import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import naive_conv1d, naive_conv2d
from lightcam.tensor_ops import (BatchNormParams, Conv2dSpec, batchnorm_infer, conv1d,
                                 conv2d, conv_out_extent, depthwise_separable, linear,
                                 linear_over_time, relu, sigmoid)

IDENTITY_BN = dict(gamma=[1.0], beta=[0.0], running_mean=[0.0], running_var=[1.0])


def bn_identity(c):
    one, zero = np.ones(c, np.float32), np.zeros(c, np.float32)
    return BatchNormParams(one, zero, zero, one, epsilon=0.0)


class TestConv2d:
    def test_zero_input(self):
        x = np.zeros((2, 4, 4), np.float32)
        w = np.random.default_rng(0).normal(size=(3, 2, 3, 3)).astype(np.float32)
        spec = Conv2dSpec(2, 3, (3, 3), padding=(1, 1))
        out = conv2d(x, w, np.zeros(3, np.float32), spec)
        assert out.shape == (3, 4, 4)
        assert np.array_equal(out, np.zeros_like(out))

    def test_identity_kernel(self):
        x = np.random.default_rng(1).normal(size=(1, 5, 6)).astype(np.float32)
        out = conv2d(x, np.array([[[[1.0]]]]), [0.0], Conv2dSpec(1, 1, (1, 1)))
        assert np.array_equal(out, x)

    def test_all_ones_kernel_sums_input(self):
        x = np.arange(1.0, 10.0, dtype=np.float32).reshape(1, 3, 3)
        out = conv2d(x, np.ones((1, 1, 3, 3), np.float32), [0.0], Conv2dSpec(1, 1, (3, 3)))
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == 45.0

    def test_channel_mismatch_names_axis(self):
        spec = Conv2dSpec(4, 2, (1, 1))
        w = np.zeros((2, 4, 1, 1), np.float32)
        with pytest.raises(ValueError, match="channel axis"):
            conv2d(np.zeros((3, 2, 2), np.float32), w, np.zeros(2), spec)

    def test_nonpositive_output_extent_rejected(self):
        spec = Conv2dSpec(1, 1, (5, 1))
        with pytest.raises(ValueError, match="non-positive output extent"):
            conv2d(np.zeros((1, 3, 3), np.float32), np.zeros((1, 1, 5, 1)), [0.0], spec)

    def test_bad_weight_shape_rejected(self):
        spec = Conv2dSpec(2, 2, (3, 3))
        with pytest.raises(ValueError, match="weight shape"):
            conv2d(np.zeros((2, 4, 4)), np.zeros((2, 2, 2, 3)), np.zeros(2), spec)

    @given(st.integers(1, 3), st.integers(1, 3), st.integers(3, 6), st.integers(3, 6),
           st.integers(1, 3), st.integers(1, 2), st.integers(0, 1), st.integers(0, 200))
    @settings(max_examples=60, deadline=None)
    def test_matches_naive_loops(self, c_in, c_out, f, t, k, s, p, seed):
        if conv_out_extent(f, k, s, p) < 1 or conv_out_extent(t, k, s, p) < 1:
            return
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, (c_in, f, t)).astype(np.float32)
        w = rng.uniform(-1, 1, (c_out, c_in, k, k)).astype(np.float32)
        b = rng.uniform(-1, 1, c_out).astype(np.float32)
        got = conv2d(x, w, b, Conv2dSpec(c_in, c_out, (k, k), (s, s), (p, p)))
        want = naive_conv2d(x, w, b, (s, s), (p, p))
        assert np.abs(got - want).max() <= 1e-5

    def test_grouped_matches_naive(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(-1, 1, (4, 5, 5)).astype(np.float32)
        w = rng.uniform(-1, 1, (4, 2, 3, 3)).astype(np.float32)
        b = rng.uniform(-1, 1, 4).astype(np.float32)
        got = conv2d(x, w, b, Conv2dSpec(4, 4, (3, 3), padding=(1, 1), groups=2))
        want = naive_conv2d(x, w, b, padding=(1, 1), groups=2)
        assert np.abs(got - want).max() <= 1e-5


class TestDepthwiseSeparable:
    def test_zero_input(self):
        spec = Conv2dSpec(3, 3, (3, 3), padding=(1, 1), groups=3)
        rng = np.random.default_rng(0)
        out = depthwise_separable(np.zeros((3, 4, 4), np.float32),
                                  rng.normal(size=(3, 1, 3, 3)), np.zeros(3),
                                  rng.normal(size=(4, 3, 1, 1)), np.zeros(4), spec)
        assert out.shape == (4, 4, 4)
        assert np.array_equal(out, np.zeros_like(out))

    def test_identity_factorization(self):
        c = 3
        x = np.random.default_rng(2).normal(size=(c, 4, 5)).astype(np.float32)
        spec = Conv2dSpec(c, c, (1, 1), groups=c)
        out = depthwise_separable(x, np.ones((c, 1, 1, 1), np.float32), np.zeros(c),
                                  np.eye(c, dtype=np.float32).reshape(c, c, 1, 1),
                                  np.zeros(c), spec)
        assert np.array_equal(out, x)

    def test_rejects_wrong_groups(self):
        spec = Conv2dSpec(4, 4, (3, 3), groups=2)
        with pytest.raises(ValueError, match="groups"):
            depthwise_separable(np.zeros((4, 4, 4)), np.zeros((4, 1, 3, 3)), np.zeros(4),
                                np.zeros((4, 4, 1, 1)), np.zeros(4), spec)

    @given(st.integers(1, 8), st.integers(1, 8), st.integers(2, 8), st.integers(2, 8),
           st.integers(1, 2), st.integers(0, 1), st.integers(0, 500))
    @settings(max_examples=60, deadline=None)
    def test_factored_kernel_oracle(self, c_in, c_out, f, t, s, p, seed):
        k = min(3, f + 2 * p, t + 2 * p)
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, (c_in, f, t)).astype(np.float32)
        dw = rng.uniform(-1, 1, (c_in, 1, k, k)).astype(np.float32)
        pw = rng.uniform(-1, 1, (c_out, c_in, 1, 1)).astype(np.float32)
        pw_b = rng.uniform(-1, 1, c_out).astype(np.float32)
        spec = Conv2dSpec(c_in, c_in, (k, k), (s, s), (p, p), groups=c_in)
        got = depthwise_separable(x, dw, np.zeros(c_in, np.float32), pw, pw_b, spec)
        factored = pw[:, :, 0, 0][:, :, None, None] * dw[None, :, 0, :, :]
        want = conv2d(x, factored, pw_b, Conv2dSpec(c_in, c_out, (k, k), (s, s), (p, p)))
        assert np.abs(got - want).max() <= 1e-5


class TestConv1d:
    def test_identity_kernel(self):
        x = np.random.default_rng(0).normal(size=(3, 7)).astype(np.float32)
        w = np.eye(3, dtype=np.float32)[:, :, None]
        assert np.array_equal(conv1d(x, w, np.zeros(3)), x)

    def test_hand_convolution_with_padding(self):
        out = conv1d(np.array([[1.0, 2.0, 3.0, 4.0]], np.float32),
                     np.ones((1, 1, 3), np.float32), [0.0], padding=1)
        assert np.array_equal(out, np.array([[3.0, 6.0, 9.0, 7.0]], np.float32))

    def test_zero_input(self):
        out = conv1d(np.zeros((2, 5), np.float32),
                     np.random.default_rng(0).normal(size=(4, 2, 3)).astype(np.float32),
                     np.zeros(4), padding=1)
        assert np.array_equal(out, np.zeros((4, 5), np.float32))

    def test_nonpositive_output_rejected(self):
        with pytest.raises(ValueError, match="non-positive"):
            conv1d(np.zeros((1, 3)), np.zeros((1, 1, 3)), [0.0], dilation=2)

    @given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 2),
           st.integers(0, 2), st.integers(0, 200))
    @settings(max_examples=60, deadline=None)
    def test_matches_naive_loops(self, c_in, c_out, k, d, p, seed):
        t = 8
        if t + 2 * p - d * (k - 1) < 1:
            return
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, (c_in, t)).astype(np.float32)
        w = rng.uniform(-1, 1, (c_out, c_in, k)).astype(np.float32)
        b = rng.uniform(-1, 1, c_out).astype(np.float32)
        got = conv1d(x, w, b, dilation=d, padding=p)
        assert np.abs(got - naive_conv1d(x, w, b, d, p)).max() <= 1e-5


class TestShapeLaw:
    @given(st.integers(1, 12), st.integers(1, 5), st.integers(1, 3), st.integers(0, 2))
    @settings(max_examples=100, deadline=None)
    def test_conv2d_extents_follow_floor_formula(self, size, k, s, p):
        out = conv_out_extent(size, k, s, p)
        if out < 1:
            return
        x = np.zeros((1, size, size), np.float32)
        y = conv2d(x, np.zeros((1, 1, k, k), np.float32), [0.0],
                   Conv2dSpec(1, 1, (k, k), (s, s), (p, p)))
        assert y.shape == (1, (size + 2 * p - k) // s + 1, (size + 2 * p - k) // s + 1)


class TestLinearity:
    @pytest.mark.parametrize("alpha", [-2.0, 0.5])
    def test_conv_ops_are_linear_without_bias(self, alpha):
        rng = np.random.default_rng(9)
        x2 = rng.uniform(-1, 1, (2, 5, 5)).astype(np.float32)
        w2 = rng.uniform(-1, 1, (3, 2, 3, 3)).astype(np.float32)
        spec = Conv2dSpec(2, 3, (3, 3), padding=(1, 1))
        zero3 = np.zeros(3, np.float32)
        assert np.abs(conv2d(alpha * x2, w2, zero3, spec)
                      - alpha * conv2d(x2, w2, zero3, spec)).max() <= 1e-5

        x1 = rng.uniform(-1, 1, (2, 6)).astype(np.float32)
        w1 = rng.uniform(-1, 1, (3, 2, 3)).astype(np.float32)
        assert np.abs(conv1d(alpha * x1, w1, zero3, padding=1)
                      - alpha * conv1d(x1, w1, zero3, padding=1)).max() <= 1e-5

        dw = rng.uniform(-1, 1, (2, 1, 3, 3)).astype(np.float32)
        pw = rng.uniform(-1, 1, (3, 2, 1, 1)).astype(np.float32)
        ds_spec = Conv2dSpec(2, 2, (3, 3), padding=(1, 1), groups=2)
        zero2 = np.zeros(2, np.float32)
        assert np.abs(depthwise_separable(alpha * x2, dw, zero2, pw, zero3, ds_spec)
                      - alpha * depthwise_separable(x2, dw, zero2, pw, zero3, ds_spec)
                      ).max() <= 1e-5


class TestBatchNorm:
    def test_identity_params(self):
        x = np.random.default_rng(0).normal(size=(3, 4, 5)).astype(np.float32)
        assert np.array_equal(batchnorm_infer(x, bn_identity(3)), x)

    def test_constant_input_centered_to_zero(self):
        c = np.full((2, 6), 3.5, np.float32)
        p = BatchNormParams([1, 1], [0, 0], [3.5, 3.5], [1, 1], epsilon=0.0)
        assert np.array_equal(batchnorm_infer(c, p), np.zeros_like(c))

    def test_scalar_formula(self):
        p = BatchNormParams([2.0], [5.0], [1.0], [3.0], epsilon=1.0)
        out = batchnorm_infer(np.array([2.0], np.float32), p)
        assert out[0] == pytest.approx(6.0, abs=1e-6)

    def test_idempotent_with_identity_params(self):
        x = np.random.default_rng(2).normal(size=(4, 7)).astype(np.float32)
        once = batchnorm_infer(x, bn_identity(4))
        assert np.array_equal(batchnorm_infer(once, bn_identity(4)), once)

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError, match="channel axis"):
            batchnorm_infer(np.zeros((3, 2)), bn_identity(4))

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError, match="running_var"):
            BatchNormParams([1.0], [0.0], [0.0], [-1.0])


class TestActivationsAndLinear:
    def test_relu_values(self):
        assert np.array_equal(relu(np.array([-1.0, 2.0])), np.array([0.0, 2.0], np.float32))

    def test_sigmoid_at_zero(self):
        assert sigmoid(np.array([0.0]))[0] == pytest.approx(0.5)

    def test_sigmoid_stable_at_extremes(self):
        out = sigmoid(np.array([-80.0, 80.0], np.float32))
        assert np.isfinite(out).all() and 0.0 <= out[0] < out[1] <= 1.0

    def test_linear_identity(self):
        x = np.random.default_rng(1).normal(size=(4, 3)).astype(np.float32)
        assert np.array_equal(linear(x, np.eye(3, dtype=np.float32), np.zeros(3)), x)

    def test_linear_mismatch_rejected(self):
        with pytest.raises(ValueError, match="inner axis"):
            linear(np.zeros(3), np.zeros((2, 4)), np.zeros(2))

    def test_linear_over_time_matches_matmul(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(3, 5)).astype(np.float32)
        w = rng.normal(size=(2, 3)).astype(np.float32)
        b = rng.normal(size=2).astype(np.float32)
        assert np.allclose(linear_over_time(x, w, b), w @ x + b[:, None], atol=1e-6)


class TestConv2dSpec:
    def test_groups_must_divide(self):
        with pytest.raises(ValueError, match="groups"):
            Conv2dSpec(4, 4, (3, 3), groups=3)

    def test_predicates(self):
        assert Conv2dSpec(8, 8, (3, 3), groups=8).is_depthwise
        assert Conv2dSpec(8, 16, (1, 1)).is_pointwise
        assert not Conv2dSpec(8, 16, (3, 3)).is_depthwise
