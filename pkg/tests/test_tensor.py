"""Autograd graph mechanics: accumulation, broadcasting, detach, no_grad."""

import numpy as np
import pytest

from pan.nn import Tensor, gradients, matmul, mul, no_grad, tsum
from pan.nn.tensor import add, div, sqrt, sub, tmean


def scalar(x):
    return float(np.asarray(x.data).reshape(-1)[0])


class TestGraph:
    def test_fanout_accumulates(self):
        x = Tensor([3.0], requires_grad=True)
        y = add(x, x)
        y.sum().backward()
        assert x.grad[0] == 2.0

    def test_chain(self):
        # d/dx of (2x + 1)^2 at x=3 is 2*(2x+1)*2 = 28
        x = Tensor([3.0], requires_grad=True)
        y = add(mul(x, 2.0), 1.0)
        loss = tsum(mul(y, y))
        loss.backward()
        assert abs(x.grad[0] - 28.0) < 1e-5

    def test_backward_requires_scalar(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ValueError):
            mul(x, 2.0).backward()

    def test_detach_blocks_gradient(self):
        x = Tensor([2.0], requires_grad=True)
        y = mul(x, 3.0).detach()
        z = mul(y, 5.0)
        assert not z.requires_grad

    def test_no_grad_builds_no_graph(self):
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            y = mul(x, 2.0)
        assert not y.requires_grad
        assert y._parents == ()
        z = mul(x, 2.0)
        assert z.requires_grad

    def test_unused_parameter_gets_zero_gradient(self):
        a = Tensor([1.0], requires_grad=True)
        b = Tensor([2.0, 3.0], requires_grad=True)
        loss = tsum(mul(a, a))
        grads = gradients(loss, {"a": a, "b": b})
        assert grads["b"].shape == (2,)
        assert np.all(grads["b"] == 0)

    def test_gradients_clears_previous_accumulation(self):
        a = Tensor([1.0], requires_grad=True)
        for _ in range(3):
            grads = gradients(tsum(mul(a, 2.0)), {"a": a})
            assert grads["a"][0] == 2.0

    def test_float32_everywhere(self):
        a = Tensor(np.arange(4, dtype=np.float64))
        b = mul(add(a, 1.5), 0.25)
        assert a.data.dtype == np.float32
        assert b.data.dtype == np.float32


class TestBroadcasting:
    def test_add_bias_reduces_gradient(self):
        x = Tensor(np.ones((4, 3), np.float32), requires_grad=True)
        b = Tensor(np.zeros(3, np.float32), requires_grad=True)
        tsum(add(x, b)).backward()
        assert b.grad.shape == (3,)
        assert np.all(b.grad == 4.0)

    def test_mul_keepdim_axis(self):
        x = Tensor(np.full((2, 3), 2.0, np.float32), requires_grad=True)
        s = Tensor(np.full((2, 1), 3.0, np.float32), requires_grad=True)
        tsum(mul(x, s)).backward()
        assert s.grad.shape == (2, 1)
        assert np.all(s.grad == 6.0)
        assert np.all(x.grad == 3.0)

    def test_div_gradients(self):
        a = Tensor([6.0], requires_grad=True)
        b = Tensor([2.0], requires_grad=True)
        div(a, b).sum().backward()
        assert abs(a.grad[0] - 0.5) < 1e-6
        assert abs(b.grad[0] + 1.5) < 1e-6

    def test_sub_and_sqrt(self):
        a = Tensor([9.0], requires_grad=True)
        b = Tensor([5.0], requires_grad=True)
        sqrt(sub(a, b)).sum().backward()
        assert abs(a.grad[0] - 0.25) < 1e-6
        assert abs(b.grad[0] + 0.25) < 1e-6


class TestReductions:
    def test_sum_axis_backward(self):
        x = Tensor(np.arange(6).reshape(2, 3).astype(np.float32), requires_grad=True)
        s = tsum(x, axis=1)
        tsum(mul(s, Tensor([2.0, 3.0]))).backward()
        assert np.allclose(x.grad, [[2, 2, 2], [3, 3, 3]])

    def test_sum_keepdims_backward(self):
        x = Tensor(np.ones((2, 3), np.float32), requires_grad=True)
        tsum(tsum(x, axis=0, keepdims=True)).backward()
        assert x.grad.shape == (2, 3)
        assert np.all(x.grad == 1.0)

    def test_mean_multi_axis(self):
        x = Tensor(np.ones((2, 3, 4), np.float32), requires_grad=True)
        m = tmean(x, axis=(0, 2), keepdims=True)
        assert m.shape == (1, 3, 1)
        tsum(m).backward()
        assert np.allclose(x.grad, 1.0 / 8.0)

    def test_mean_all(self):
        x = Tensor(np.arange(4).astype(np.float32), requires_grad=True)
        m = tmean(x)
        assert scalar(m) == 1.5
        m.backward()
        assert np.allclose(x.grad, 0.25)


class TestMatmul:
    def test_forward_and_backward(self):
        a = Tensor(np.array([[1.0, 2.0]], np.float32), requires_grad=True)
        w = Tensor(np.array([[3.0], [4.0]], np.float32), requires_grad=True)
        out = matmul(a, w)
        assert scalar(out) == 11.0
        out.sum().backward()
        assert np.allclose(a.grad, [[3.0, 4.0]])
        assert np.allclose(w.grad, [[1.0], [2.0]])

    def test_reshape_roundtrip_gradient(self):
        x = Tensor(np.arange(6).astype(np.float32), requires_grad=True)
        y = x.reshape((2, 3))
        tsum(mul(y, Tensor(np.full((2, 3), 2.0, np.float32)))).backward()
        assert x.grad.shape == (6,)
        assert np.all(x.grad == 2.0)
