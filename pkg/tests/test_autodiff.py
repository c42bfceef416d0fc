"""Tests for the reverse-mode engine: forward semantics, adjoints, graph rules."""

import numpy as np
import pytest

from flowcast import autodiff
from flowcast.autodiff import (
    Tensor,
    add,
    add_bias,
    backward,
    concat,
    conv1d_same,
    matmul,
    mul,
    relu,
    reshape,
    scale,
    sigmoid,
    slice_axis,
    sub,
    tanh,
    tensor_mean,
    tensor_sum,
)

from gradcheck import assert_grads_close, check_gradients, finite_difference


def t(data, rg=True):
    return Tensor(np.asarray(data, dtype=float), requires_grad=rg)


class TestForward:
    def test_matmul_identity(self):
        out = matmul(t([[1.0, 0.0], [0.0, 1.0]]), t([[3.0], [4.0]]))
        assert np.array_equal(out.data, [[3.0], [4.0]])

    def test_matmul_hand(self):
        out = matmul(t([[1.0, 2.0], [3.0, 4.0]]), t([[5.0], [6.0]]))
        assert np.array_equal(out.data, [[17.0], [39.0]])

    def test_matmul_shape_error_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(t(np.zeros((2, 3))), t(np.zeros((2, 2))))

    def test_sigmoid_zero(self):
        assert sigmoid(t([0.0])).data[0] == 0.5

    def test_tanh_zero_relu_negative(self):
        assert tanh(t([0.0])).data[0] == 0.0
        assert relu(t([-3.0])).data[0] == 0.0

    def test_binary_shape_error(self):
        with pytest.raises(ValueError, match=r"\(2,\) vs \(3,\)"):
            add(t([1.0, 2.0]), t([1.0, 2.0, 3.0]))

    def test_concat_single(self):
        a = t([[1.0, 2.0]])
        assert np.array_equal(concat([a], axis=0).data, a.data)

    def test_concat_shapes(self):
        a, b = t(np.ones((3, 4))), t(np.ones((3, 4)))
        assert concat([a, b], axis=0).data.shape == (6, 4)

    def test_concat_incompatible(self):
        with pytest.raises(ValueError, match="incompatible"):
            concat([t(np.ones((3, 4))), t(np.ones((3, 5)))], axis=0)

    def test_conv_identity_kernel(self):
        sig = t(np.arange(5.0).reshape(1, 5))
        out = conv1d_same(sig, t(np.ones((1, 1, 1))), t([0.0]))
        assert np.array_equal(out.data, sig.data)

    def test_conv_even_kernel_pad_split(self):
        # k=2 pads 0 on the left and 1 on the right.
        out = conv1d_same(t([[1.0, 2.0, 3.0]]), t([[[1.0, 1.0]]]), t([0.0]))
        assert np.array_equal(out.data, [[3.0, 5.0, 3.0]])

    def test_conv_k4_shape(self):
        out = conv1d_same(t(np.random.default_rng(0).normal(size=(1, 25))),
                          t(np.zeros((1, 1, 4))), t([0.0]))
        assert out.data.shape == (1, 25)

    def test_conv_channel_mismatch(self):
        with pytest.raises(ValueError, match="channel mismatch"):
            conv1d_same(t(np.ones((2, 5))), t(np.ones((1, 1, 3))), t([0.0]))

    def test_determinism(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
        r1 = tanh(matmul(t(a), t(b))).data
        r2 = tanh(matmul(t(a), t(b))).data
        assert np.array_equal(r1, r2)

    def test_check_finite_flag(self):
        autodiff.CHECK_FINITE = True
        try:
            with pytest.raises(FloatingPointError):
                Tensor([np.inf])
        finally:
            autodiff.CHECK_FINITE = False


class TestBackward:
    def test_identity(self):
        x = t([3.0])
        loss = tensor_sum(x)
        backward(loss)
        assert np.array_equal(x.grad, [1.0])

    def test_sum_of_squares(self):
        x = t([1.0, -2.0, 0.5])
        backward(tensor_sum(mul(x, x)))
        assert np.allclose(x.grad, 2.0 * x.data)

    def test_non_scalar_loss_rejected(self):
        with pytest.raises(ValueError, match="scalar"):
            backward(t([1.0, 2.0]))

    def test_sigmoid_slope_at_zero(self):
        x = t([0.0])
        fd = finite_difference(lambda: tensor_sum(sigmoid(x)), [x])[0]
        assert abs(fd[0] - 0.25) < 1e-9
        backward(tensor_sum(sigmoid(x)))
        assert_grads_close(x.grad, fd)

    def test_matmul_grad_is_ones_times_bt(self):
        rng = np.random.default_rng(1)
        a = t(rng.normal(size=(3, 4)))
        b = t(rng.normal(size=(4, 2)))
        backward(tensor_sum(matmul(a, b)))
        assert_grads_close(a.grad, np.ones((3, 2)) @ b.data.T)
        num = finite_difference(lambda: tensor_sum(matmul(a, b)), [a])[0]
        assert_grads_close(a.grad, num)

    def test_no_double_accumulation_with_zeroing(self):
        rng = np.random.default_rng(7)
        w = t(rng.normal(size=(3, 3)))
        x = Tensor(rng.normal(size=(3, 2)))

        def run():
            w.zero_grad()
            backward(tensor_sum(tanh(matmul(w, x))))
            return w.grad.copy()

        assert np.array_equal(run(), run())

    def test_accumulates_without_zeroing(self):
        w = t(np.eye(2))
        x = Tensor(np.ones((2, 1)))
        backward(tensor_sum(matmul(w, x)))
        first = w.grad.copy()
        backward(tensor_sum(matmul(w, x)))
        assert np.array_equal(w.grad, 2.0 * first)

    def test_each_node_visited_once_through_fanout(self):
        # y = x*x + x exercises a node used twice as a parent.
        x = t([2.0])
        backward(tensor_sum(add(mul(x, x), x)))
        assert np.allclose(x.grad, [5.0])


OPS = {
    "sigmoid": lambda a, b: sigmoid(a),
    "tanh": lambda a, b: tanh(a),
    "relu": lambda a, b: relu(a),
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": lambda a, b: scale(a, 1.7),
    "matmul2": lambda a, b: matmul(reshape(a, (2, 3)), reshape(b, (3, 2))),
    "concat": lambda a, b: concat([a, b], axis=0),
    "slice": lambda a, b: slice_axis(a, 0, 1, 4),
    "reshape": lambda a, b: reshape(a, (3, 2)),
    "mean": lambda a, b: reshape(tensor_mean(a), (1,)),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_matches_finite_differences(name):
    # 100 random draws per op, tolerance from the finite-difference oracle.
    op = OPS[name]
    rng = np.random.default_rng(11)
    for _ in range(100):
        a = t(rng.normal(size=6))
        b = t(rng.normal(size=6))
        check_gradients(lambda: tensor_sum(op(a, b)), [a, b])


def test_conv_grads_match_finite_differences():
    rng = np.random.default_rng(5)
    for k in (1, 2, 3, 4):
        sig = t(rng.normal(size=(2, 7)))
        ker = t(rng.normal(size=(3, 2, k)))
        bias = t(rng.normal(size=3))
        check_gradients(
            lambda: tensor_sum(conv1d_same(sig, ker, bias)), [sig, ker, bias]
        )


def test_conv_with_trailing_axes_grads():
    rng = np.random.default_rng(6)
    sig = t(rng.normal(size=(1, 5, 3, 2)))
    ker = t(rng.normal(size=(1, 1, 4)))
    bias = t(rng.normal(size=1))
    check_gradients(lambda: tensor_sum(conv1d_same(sig, ker, bias)), [sig, ker, bias])


def test_add_bias_grads():
    rng = np.random.default_rng(8)
    x = t(rng.normal(size=(4, 3)))
    v = t(rng.normal(size=4))
    check_gradients(lambda: tensor_sum(mul(add_bias(x, v), add_bias(x, v))), [x, v])


def test_composed_network_grads():
    rng = np.random.default_rng(9)
    w1, w2 = t(rng.normal(size=(4, 4))), t(rng.normal(size=(2, 4)))
    x = Tensor(rng.normal(size=(4, 3)))

    def f():
        h = tanh(matmul(w1, x))
        return tensor_mean(mul(matmul(w2, h), matmul(w2, h)))

    check_gradients(f, [w1, w2])
