import numpy as np
import pytest
from numba import get_num_threads, set_num_threads

from dualnorm import ops
from dualnorm.errors import ConfigurationError
from dualnorm.ops import (
    Param,
    conv2d_backward,
    conv2d_forward,
    global_avg_pool_backward,
    global_avg_pool_forward,
    linear_nobias_backward,
    linear_nobias_forward,
    relu6_backward,
    relu6_forward,
)

from oracles import conv2d_oracle


def make_param(arr, name="w"):
    return Param(name, np.asarray(arr))


class TestConvForward:
    def test_pointwise_scalar_product(self):
        x = np.full((1, 1, 1, 1), 2.0, dtype=np.float32)
        w = make_param(np.full((1, 1, 1, 1), 3.0, dtype=np.float32))
        y = conv2d_forward(x, w, stride=1, kind="pointwise1x1")
        assert y.shape == (1, 1, 1, 1)
        assert y[0, 0, 0, 0] == pytest.approx(6.0)

    def test_depthwise_identity_kernel(self, rng):
        x = rng.standard_normal((2, 3, 6, 5)).astype(np.float32)
        w = np.zeros((3, 3, 3), dtype=np.float32)
        w[:, 1, 1] = 1.0
        y = conv2d_forward(x, make_param(w), stride=1, kind="depthwise3x3")
        np.testing.assert_array_equal(y, x)

    def test_standard_stride2_shape_and_values(self, rng):
        x = rng.standard_normal((2, 3, 8, 4)).astype(np.float32)
        w = rng.standard_normal((5, 3, 3, 3)).astype(np.float32)
        y = conv2d_forward(x, make_param(w), stride=2, kind="standard3x3")
        assert y.shape == (2, 5, 4, 2)
        expected = conv2d_oracle(x, w, stride=2, kind="standard3x3")
        np.testing.assert_allclose(y, expected, atol=1e-5)

    @pytest.mark.parametrize("kind,stride", [
        ("standard3x3", 1), ("standard3x3", 2),
        ("pointwise1x1", 1),
        ("depthwise3x3", 1), ("depthwise3x3", 2),
    ])
    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_exact_match_with_oracle(self, kind, stride, dtype, rng):
        # Same summation order as the sliding-window oracle: results must be
        # value-identical, not merely close.
        x = rng.uniform(-1, 1, size=(2, 4, 8, 8)).astype(dtype)
        c_out = 4 if kind == "depthwise3x3" else 6
        w = rng.uniform(-1, 1, size=ops.conv_weight_shape(kind, 4, c_out)).astype(dtype)
        y = conv2d_forward(x, make_param(w), stride=stride, kind=kind)
        expected = conv2d_oracle(x, w, stride=stride, kind=kind)
        np.testing.assert_array_equal(y, expected)

    def test_forward_is_pure(self, rng):
        x = rng.standard_normal((2, 3, 8, 8)).astype(np.float32)
        w = make_param(rng.standard_normal((4, 3, 3, 3)).astype(np.float32))
        y1 = conv2d_forward(x, w, stride=1, kind="standard3x3")
        y2 = conv2d_forward(x, w, stride=1, kind="standard3x3")
        assert y1.tobytes() == y2.tobytes()

    def test_parallel_matches_single_thread(self, rng):
        x = rng.standard_normal((8, 6, 16, 8)).astype(np.float32)
        w = make_param(rng.standard_normal((10, 6, 3, 3)).astype(np.float32))
        n = get_num_threads()
        try:
            set_num_threads(1)
            y1 = conv2d_forward(x, w, stride=1, kind="standard3x3")
            set_num_threads(max(2, n))
            y2 = conv2d_forward(x, w, stride=1, kind="standard3x3")
        finally:
            set_num_threads(n)
        assert y1.tobytes() == y2.tobytes()

    def test_weight_shape_mismatch_rejected(self, rng):
        x = rng.standard_normal((1, 3, 4, 4)).astype(np.float32)
        w = make_param(rng.standard_normal((2, 5, 3, 3)).astype(np.float32))
        with pytest.raises(ConfigurationError):
            conv2d_forward(x, w, stride=1, kind="standard3x3")

    def test_bad_stride_rejected(self, rng):
        x = rng.standard_normal((1, 3, 4, 4)).astype(np.float32)
        w = make_param(rng.standard_normal((2, 3, 3, 3)).astype(np.float32))
        with pytest.raises(ConfigurationError):
            conv2d_forward(x, w, stride=3, kind="standard3x3")


class TestConvBackward:
    def test_scalar_product_rule(self):
        x = np.full((1, 1, 1, 1), 2.0, dtype=np.float32)
        w = make_param(np.full((1, 1, 1, 1), 3.0, dtype=np.float32))
        gy = np.ones((1, 1, 1, 1), dtype=np.float32)
        gx = conv2d_backward(gy, x, w, stride=1, kind="pointwise1x1")
        assert w.grad[0, 0, 0, 0] == pytest.approx(2.0)
        assert gx[0, 0, 0, 0] == pytest.approx(3.0)

    def test_zero_upstream_gives_zero_grads(self, rng):
        x = rng.standard_normal((2, 3, 6, 6)).astype(np.float32)
        w = make_param(rng.standard_normal((4, 3, 3, 3)).astype(np.float32))
        gy = np.zeros((2, 4, 6, 6), dtype=np.float32)
        gx = conv2d_backward(gy, x, w, stride=1, kind="standard3x3")
        assert not gx.any()
        assert not w.grad.any()

    def test_grad_shape_mismatch_rejected(self, rng):
        x = rng.standard_normal((2, 3, 6, 6)).astype(np.float32)
        w = make_param(rng.standard_normal((4, 3, 3, 3)).astype(np.float32))
        gy = np.zeros((2, 4, 5, 5), dtype=np.float32)
        with pytest.raises(ConfigurationError):
            conv2d_backward(gy, x, w, stride=1, kind="standard3x3")

    def test_weight_grad_accumulates(self, rng):
        x = rng.standard_normal((1, 2, 4, 4)).astype(np.float32)
        w = make_param(rng.standard_normal((3, 2, 1, 1)).astype(np.float32))
        gy = rng.standard_normal((1, 3, 4, 4)).astype(np.float32)
        conv2d_backward(gy, x, w, stride=1, kind="pointwise1x1")
        once = w.grad.copy()
        conv2d_backward(gy, x, w, stride=1, kind="pointwise1x1")
        np.testing.assert_allclose(w.grad, 2 * once, rtol=1e-6)


class TestRelu6:
    def test_forward_definition(self):
        x = np.array([-1.0, 3.0, 9.0], dtype=np.float32)
        np.testing.assert_array_equal(relu6_forward(x), [0.0, 3.0, 6.0])

    def test_backward_definition(self):
        x = np.array([-1.0, 3.0, 9.0], dtype=np.float32)
        gy = np.ones_like(x)
        np.testing.assert_array_equal(relu6_backward(gy, x), [0.0, 1.0, 0.0])


class TestGlobalAvgPool:
    def test_constant_channel(self):
        x = np.full((1, 2, 3, 3), 7.0, dtype=np.float32)
        y = global_avg_pool_forward(x)
        assert y.shape == (1, 2, 1, 1)
        np.testing.assert_allclose(y, 7.0)

    def test_small_mean(self):
        x = np.array([1.0, 2.0, 3.0, 4.0], dtype=np.float32).reshape(1, 1, 2, 2)
        assert global_avg_pool_forward(x)[0, 0, 0, 0] == pytest.approx(2.5)

    def test_backward_distributes_uniformly(self):
        gy = np.full((1, 1, 1, 1), 8.0, dtype=np.float32)
        gx = global_avg_pool_backward(gy, (1, 1, 2, 2))
        np.testing.assert_allclose(gx, 2.0)


class TestLinearNoBias:
    def test_identity_weight(self, rng):
        x = rng.standard_normal((3, 4)).astype(np.float32)
        w = make_param(np.eye(4, dtype=np.float32))
        np.testing.assert_allclose(linear_nobias_forward(x, w), x, atol=1e-6)

    def test_hand_product(self):
        x = np.array([[1.0, 0.0]], dtype=np.float32)
        w = make_param(np.array([[2.0, 5.0], [0.0, 3.0]], dtype=np.float32))
        np.testing.assert_allclose(linear_nobias_forward(x, w), [[2.0, 0.0]])

    def test_dim_mismatch_rejected(self, rng):
        x = rng.standard_normal((3, 4)).astype(np.float32)
        w = make_param(rng.standard_normal((2, 5)).astype(np.float32))
        with pytest.raises(ConfigurationError):
            linear_nobias_forward(x, w)

    def test_backward_shapes(self, rng):
        x = rng.standard_normal((3, 4)).astype(np.float32)
        w = make_param(rng.standard_normal((2, 4)).astype(np.float32))
        gy = rng.standard_normal((3, 2)).astype(np.float32)
        gx = linear_nobias_backward(gy, x, w)
        assert gx.shape == x.shape
        assert w.grad.shape == w.data.shape
        np.testing.assert_allclose(gx, gy @ w.data, rtol=1e-5)
        np.testing.assert_allclose(w.grad, gy.T @ x, rtol=1e-5)
