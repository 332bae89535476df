"""Layer primitives: conv/pool stacks, batchnorm, activations, losses.

Layout is NCHW throughout, float32, row-major.  Convolution arithmetic:
out = floor((in + 2*pad - kernel) / stride) + 1, and the transposed
convolution produces (in - 1)*stride - 2*pad + kernel so the two are
adjoint for matching hyperparameters.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, accumulate, add, div, matmul, mul, sqrt, sub, tmean

LOG_EPS = 1e-7  # clamp for log() in cross-entropy
BN_EPS = 1e-5  # variance floor inside batchnorm
BN_MOMENTUM = 0.1  # running-stat update rate


def conv_out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    span = size + 2 * padding - kernel
    if span < 0:
        raise ValueError(
            "kernel %d exceeds padded input %d" % (kernel, size + 2 * padding)
        )
    return span // stride + 1


def tconv_out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    out = (size - 1) * stride - 2 * padding + kernel
    if out < 1:
        raise ValueError("transposed conv output collapses to %d" % out)
    return out


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0), parents=(x,))
    if out.requires_grad:
        mask = x.data > 0

        def grad_fn(g):
            accumulate(x, g * mask)

        out._grad_fn = grad_fn
    return out


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax over the last axis, max-subtracted for stability."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y, parents=(x,))
    if out.requires_grad:

        def grad_fn(g):
            dot = (g * y).sum(axis=-1, keepdims=True)
            accumulate(x, y * (g - dot))

        out._grad_fn = grad_fn
    return out


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation.  x: (N,C,H,W), w: (K,C,kh,kw), b: (K,)."""
    n, c, h, wd = x.data.shape
    k, cw, kh, kw = w.data.shape
    if cw != c:
        raise ValueError("kernel expects %d input channels, got %d" % (cw, c))
    ho = conv_out_size(h, kh, stride, padding)
    wo = conv_out_size(wd, kw, stride, padding)
    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out_data = np.tensordot(win, w.data, axes=([1, 4, 5], [1, 2, 3]))  # (N,Ho,Wo,K)
    out_data = np.ascontiguousarray(out_data.transpose(0, 3, 1, 2))
    out_data += b.data[None, :, None, None]
    out = Tensor(out_data, parents=(x, w, b))
    if out.requires_grad:

        def grad_fn(g):
            if b.requires_grad:
                accumulate(b, g.sum(axis=(0, 2, 3)))
            if w.requires_grad:
                accumulate(w, np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3])))
            if x.requires_grad:
                cols = np.tensordot(g, w.data, axes=(1, 0))  # (N,Ho,Wo,C,kh,kw)
                gxp = np.zeros_like(xp)
                for i in range(kh):
                    hi = i + stride * (ho - 1) + 1
                    for j in range(kw):
                        wj = j + stride * (wo - 1) + 1
                        gxp[:, :, i:hi:stride, j:wj:stride] += cols[
                            :, :, :, :, i, j
                        ].transpose(0, 3, 1, 2)
                if padding:
                    gxp = gxp[:, :, padding : padding + h, padding : padding + wd]
                accumulate(x, gxp)

        out._grad_fn = grad_fn
    return out


def transposed_conv2d(
    x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0
) -> Tensor:
    """Adjoint of conv2d.  x: (N,C,H,W), w: (C,D,kh,kw), b: (D,)."""
    n, c, h, wd = x.data.shape
    cw, d, kh, kw = w.data.shape
    if cw != c:
        raise ValueError("kernel expects %d input channels, got %d" % (cw, c))
    ho = tconv_out_size(h, kh, stride, padding)
    wo = tconv_out_size(wd, kw, stride, padding)
    hf = (h - 1) * stride + kh  # size before cropping the padding
    wf = (wd - 1) * stride + kw
    cols = np.tensordot(x.data, w.data, axes=(1, 0))  # (N,H,W,D,kh,kw)
    full = np.zeros((n, d, hf, wf), dtype=np.float32)
    for i in range(kh):
        hi = i + stride * (h - 1) + 1
        for j in range(kw):
            wj = j + stride * (wd - 1) + 1
            full[:, :, i:hi:stride, j:wj:stride] += cols[:, :, :, :, i, j].transpose(
                0, 3, 1, 2
            )
    out_data = full[:, :, padding : padding + ho, padding : padding + wo] + b.data[
        None, :, None, None
    ]
    out = Tensor(out_data, parents=(x, w, b))
    if out.requires_grad:

        def grad_fn(g):
            if b.requires_grad:
                accumulate(b, g.sum(axis=(0, 2, 3)))
            gp = np.pad(g, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
            if x.requires_grad:
                win = sliding_window_view(gp, (kh, kw), axis=(2, 3))[
                    :, :, ::stride, ::stride
                ]
                gx = np.tensordot(win, w.data, axes=([1, 4, 5], [1, 2, 3]))
                accumulate(x, np.ascontiguousarray(gx.transpose(0, 3, 1, 2)))
            if w.requires_grad:
                gw = np.zeros_like(w.data)
                for i in range(kh):
                    hi = i + stride * (h - 1) + 1
                    for j in range(kw):
                        wj = j + stride * (wd - 1) + 1
                        gslice = gp[:, :, i:hi:stride, j:wj:stride]
                        gw[:, :, i, j] = np.tensordot(
                            x.data, gslice, axes=([0, 2, 3], [0, 2, 3])
                        )
                accumulate(w, gw)

        out._grad_fn = grad_fn
    return out


def maxpool2d(x: Tensor, window: int, stride: int | None = None):
    """Max pooling; returns (pooled, argmax offsets within each window).

    Ties take the first occurrence in row-major window order.
    """
    if stride is None:
        stride = window
    n, c, h, wd = x.data.shape
    if window > h or window > wd:
        raise ValueError("pool window %d exceeds input %dx%d" % (window, h, wd))
    ho = (h - window) // stride + 1
    wo = (wd - window) // stride + 1
    win = sliding_window_view(x.data, (window, window), axis=(2, 3))[
        :, :, ::stride, ::stride
    ]
    flat = win.reshape(n, c, ho, wo, window * window)
    idx = flat.argmax(axis=-1)
    out_data = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    out = Tensor(np.ascontiguousarray(out_data), parents=(x,))
    if out.requires_grad:

        def grad_fn(g):
            gx = np.zeros_like(x.data)
            h_in = (np.arange(ho) * stride)[None, None, :, None] + idx // window
            w_in = (np.arange(wo) * stride)[None, None, None, :] + idx % window
            np.add.at(
                gx,
                (
                    np.arange(n)[:, None, None, None],
                    np.arange(c)[None, :, None, None],
                    h_in,
                    w_in,
                ),
                g,
            )
            accumulate(x, gx)

        out._grad_fn = grad_fn
    return out, idx


def unpool_nearest(x: Tensor, scale: int) -> Tensor:
    """Nearest-neighbour upsampling by an integer factor."""
    n, c, h, wd = x.data.shape
    out_data = x.data.repeat(scale, axis=2).repeat(scale, axis=3)
    out = Tensor(out_data, parents=(x,))
    if out.requires_grad:

        def grad_fn(g):
            accumulate(x, g.reshape(n, c, h, scale, wd, scale).sum(axis=(3, 5)))

        out._grad_fn = grad_fn
    return out


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    stats: dict,
    mode: str,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> Tensor:
    """Batch normalization over (N,...) for 2-D or (N,H,W) per channel for 4-D.

    Composed from differentiable primitives; train mode also folds the
    batch mean/variance into the running stats as a detached side effect.
    """
    if x.ndim == 4:
        axes = (0, 2, 3)
        pshape = (1, -1, 1, 1)
    elif x.ndim == 2:
        axes = (0,)
        pshape = (1, -1)
    else:
        raise ValueError("batchnorm expects 2-D or 4-D input, got %d-D" % x.ndim)
    gam = gamma.reshape(pshape)
    bet = beta.reshape(pshape)
    if mode == "train":
        mu = tmean(x, axes, keepdims=True)
        xc = sub(x, mu)
        var = tmean(mul(xc, xc), axes, keepdims=True)
        xn = div(xc, sqrt(add(var, eps)))
        stats["mean"] = (1.0 - momentum) * stats["mean"] + momentum * mu.data.reshape(-1)
        stats["var"] = (1.0 - momentum) * stats["var"] + momentum * var.data.reshape(-1)
    elif mode == "infer":
        rm = Tensor(stats["mean"].reshape(pshape))
        rv = Tensor(stats["var"].reshape(pshape))
        xn = div(sub(x, rm), sqrt(add(rv, eps)))
    else:
        raise ValueError("unknown batchnorm mode %r" % mode)
    return add(mul(xn, gam), bet)


def cross_entropy(pred: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under probabilities.

    pred rows must already sum to 1 (within 1e-5); probabilities are
    clamped to [1e-7, 1] before the log.
    """
    if pred.ndim != 2:
        raise ValueError("cross_entropy expects (N, classes), got %r" % (pred.shape,))
    n, classes = pred.data.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError("labels shape %r does not match batch %d" % (labels.shape, n))
    if labels.min(initial=0) < 0 or (labels.size and labels.max() >= classes):
        raise IndexError("label outside [0, %d)" % classes)
    sums = pred.data.sum(axis=-1)
    if np.abs(sums - 1.0).max() > 1e-5:
        raise ValueError("prediction rows must sum to 1 (max deviation %g)"
                         % float(np.abs(sums - 1.0).max()))
    rows = np.arange(n)
    picked = pred.data[rows, labels]
    clamped = np.clip(picked, LOG_EPS, 1.0)
    loss = np.array(-np.log(clamped).mean(), dtype=np.float32)
    out = Tensor(loss, parents=(pred,))
    if out.requires_grad:
        live = (picked >= LOG_EPS) & (picked <= 1.0)

        def grad_fn(g):
            gx = np.zeros_like(pred.data)
            gx[rows, labels] = np.where(live, -1.0 / clamped, 0.0) * (float(g) / n)
            accumulate(pred, gx)

        out._grad_fn = grad_fn
    return out


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared error over all elements; shapes must match exactly."""
    if a.data.shape != b.data.shape:
        raise ValueError("mse shapes differ: %r vs %r" % (a.data.shape, b.data.shape))
    diff = a.data - b.data
    loss = np.array((diff * diff).mean(), dtype=np.float32)
    out = Tensor(loss, parents=(a, b))
    if out.requires_grad:
        scale = 2.0 / diff.size

        def grad_fn(g):
            gd = (float(g) * scale) * diff
            if a.requires_grad:
                accumulate(a, gd)
            if b.requires_grad:
                accumulate(b, -gd)

        out._grad_fn = grad_fn
    return out
