"""Central finite-difference checks for every layer's analytic gradient.

Each case builds a small random configuration, runs the real float32 op
through autograd for the analytic gradient, and differences an independent
float64 re-implementation of the same forward math for the numeric oracle.
The float64 twin keeps the quotient (f(x+h)-f(x-h))/(h+ + h-) from being
swamped by float32 value rounding, and doubles as a second opinion on the
forward formulas: if an op's forward drifts from the twin, its gradient
stops matching and the check fails.  Case generators keep inputs away from
non-differentiable points (relu kinks, pooling ties) by construction,
since central differences are meaningless there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import ops
from ..seeding import seeded_rng
from .tensor import Tensor, gradients, mul, tsum

FD_STEP = 1e-3
TOLERANCE = 1e-3


@dataclass
class LayerReport:
    name: str
    cases: int
    max_rel_err: float

    @property
    def ok(self) -> bool:
        return self.max_rel_err <= TOLERANCE


def fd_gradient(fn, arrays: dict, wrt: str, step: float = FD_STEP) -> np.ndarray:
    """Central differences of fn(arrays) w.r.t. arrays[wrt], elementwise.

    fn must return a python float.  The effective step is measured after
    float32 rounding so the quotient uses the perturbation actually applied.
    """
    base = arrays[wrt]
    grad = np.zeros(base.shape, dtype=np.float64)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        hp = float(flat[i]) - float(saved)
        fplus = fn(arrays)
        flat[i] = saved - step
        hm = float(saved) - float(flat[i])
        fminus = fn(arrays)
        flat[i] = saved
        gflat[i] = (fplus - fminus) / (hp + hm)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = float(np.linalg.norm(analytic.astype(np.float64) - numeric))
    den = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), 1e-8)
    return num / den


def _away_from_zero(rng, shape, low=0.2, high=1.5):
    """Values bounded away from 0 so relu kinks stay > FD_STEP away."""
    mag = rng.uniform(low, high, size=shape).astype(np.float32)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0).astype(np.float32)
    return mag * sign


def _spaced_values(rng, shape, gap=0.05):
    """A shuffled grid with pairwise gaps > 2*FD_STEP (no pooling ties)."""
    n = int(np.prod(shape))
    vals = np.arange(n, dtype=np.float32) * gap
    vals += rng.uniform(0.0, gap * 0.3, size=n).astype(np.float32)
    rng.shuffle(vals)
    return (vals - vals.mean()).reshape(shape)


def _check(graph_fn, value_fn, arrays: dict) -> float:
    params = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
    analytic = gradients(graph_fn(params), params)
    worst = 0.0
    for k in arrays:
        fd = fd_gradient(value_fn, arrays, k)
        worst = max(worst, relative_error(analytic[k], fd))
    return worst


# -- float64 forward twins ---------------------------------------------------


def _conv64(x, w, b, stride, padding):
    xp = np.pad(x.astype(np.float64), ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(xp, w.shape[2:], axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(win, w.astype(np.float64), axes=([1, 4, 5], [1, 2, 3]))
    return out.transpose(0, 3, 1, 2) + b.astype(np.float64)[None, :, None, None]


def _tconv64(x, w, b, stride, padding):
    n, c, h, wd = x.shape
    _, d, kh, kw = w.shape
    x64, w64 = x.astype(np.float64), w.astype(np.float64)
    full = np.zeros((n, d, (h - 1) * stride + kh, (wd - 1) * stride + kw))
    cols = np.tensordot(x64, w64, axes=(1, 0))
    for i in range(kh):
        for j in range(kw):
            full[:, :, i : i + stride * (h - 1) + 1 : stride,
                 j : j + stride * (wd - 1) + 1 : stride] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    ho = (h - 1) * stride - 2 * padding + kh
    wo = (wd - 1) * stride - 2 * padding + kw
    return full[:, :, padding : padding + ho, padding : padding + wo] + b.astype(
        np.float64
    )[None, :, None, None]


def _maxpool64(x, window, stride):
    n, c, h, wd = x.shape
    win = sliding_window_view(x.astype(np.float64), (window, window), axis=(2, 3))[
        :, :, ::stride, ::stride
    ]
    flat = win.reshape(win.shape[:4] + (window * window,))
    return flat.max(axis=-1)


def _batchnorm64(x, gamma, beta, eps=ops.BN_EPS):
    x64 = x.astype(np.float64)
    axes = (0, 2, 3) if x.ndim == 4 else (0,)
    pshape = (1, -1, 1, 1) if x.ndim == 4 else (1, -1)
    mu = x64.mean(axis=axes, keepdims=True)
    var = ((x64 - mu) ** 2).mean(axis=axes, keepdims=True)
    xn = (x64 - mu) / np.sqrt(var + eps)
    return xn * gamma.astype(np.float64).reshape(pshape) + beta.astype(np.float64).reshape(pshape)


def _softmax64(x):
    x64 = x.astype(np.float64)
    e = np.exp(x64 - x64.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _ce64(p, labels):
    picked = np.clip(p[np.arange(p.shape[0]), labels], ops.LOG_EPS, 1.0)
    return float(-np.log(picked).mean())


# -- per-layer case generators ---------------------------------------------


def _case_conv(rng):
    n, c, k = int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
    kh = int(rng.integers(1, 4))
    stride = int(rng.integers(1, 3))
    padding = int(rng.integers(0, 3))
    h = int(rng.integers(max(4, kh), 8))
    arrays = {
        "x": rng.uniform(-1, 1, (n, c, h, h)).astype(np.float32),
        "w": rng.uniform(-1, 1, (k, c, kh, kh)).astype(np.float32),
        "b": rng.uniform(-1, 1, (k,)).astype(np.float32),
    }
    ho = ops.conv_out_size(h, kh, stride, padding)
    wl = rng.uniform(-1, 1, (n, k, ho, ho)).astype(np.float32)
    graph = lambda t: tsum(mul(ops.conv2d(t["x"], t["w"], t["b"], stride, padding), Tensor(wl)))
    value = lambda a: float((_conv64(a["x"], a["w"], a["b"], stride, padding) * wl).sum())
    return graph, value, arrays


def _case_tconv(rng):
    while True:
        n, c, d = int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
        kh = int(rng.integers(1, 5))
        stride = int(rng.integers(1, 3))
        padding = int(rng.integers(0, 2))
        h = int(rng.integers(3, 7))
        if (h - 1) * stride - 2 * padding + kh >= 1:
            break
    arrays = {
        "x": rng.uniform(-1, 1, (n, c, h, h)).astype(np.float32),
        "w": rng.uniform(-1, 1, (c, d, kh, kh)).astype(np.float32),
        "b": rng.uniform(-1, 1, (d,)).astype(np.float32),
    }
    ho = ops.tconv_out_size(h, kh, stride, padding)
    wl = rng.uniform(-1, 1, (n, d, ho, ho)).astype(np.float32)
    graph = lambda t: tsum(
        mul(ops.transposed_conv2d(t["x"], t["w"], t["b"], stride, padding), Tensor(wl))
    )
    value = lambda a: float((_tconv64(a["x"], a["w"], a["b"], stride, padding) * wl).sum())
    return graph, value, arrays


def _case_maxpool(rng):
    n, c = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    window = int(rng.integers(2, 4))
    stride = int(rng.integers(1, window + 1))
    h = int(rng.integers(window + 2, window + 6))
    arrays = {"x": _spaced_values(rng, (n, c, h, h))}
    ho = (h - window) // stride + 1
    wl = rng.uniform(-1, 1, (n, c, ho, ho)).astype(np.float32)
    graph = lambda t: tsum(mul(ops.maxpool2d(t["x"], window, stride)[0], Tensor(wl)))
    value = lambda a: float((_maxpool64(a["x"], window, stride) * wl).sum())
    return graph, value, arrays


def _case_unpool(rng):
    n, c, h = int(rng.integers(1, 3)), int(rng.integers(1, 3)), int(rng.integers(2, 6))
    scale = int(rng.integers(2, 4))
    arrays = {"x": rng.uniform(-1, 1, (n, c, h, h)).astype(np.float32)}
    wl = rng.uniform(-1, 1, (n, c, h * scale, h * scale)).astype(np.float32)
    graph = lambda t: tsum(mul(ops.unpool_nearest(t["x"], scale), Tensor(wl)))
    value = lambda a: float(
        (a["x"].astype(np.float64).repeat(scale, 2).repeat(scale, 3) * wl).sum()
    )
    return graph, value, arrays


def _case_batchnorm(rng):
    if rng.random() < 0.5:
        n, c, h = int(rng.integers(4, 7)), int(rng.integers(1, 4)), int(rng.integers(3, 6))
        shape = (n, c, h, h)
    else:
        n, c = int(rng.integers(4, 9)), int(rng.integers(2, 6))
        shape = (n, c)
    arrays = {
        "x": rng.uniform(-2, 2, shape).astype(np.float32),
        "gamma": rng.uniform(0.5, 1.5, (c,)).astype(np.float32),
        "beta": rng.uniform(-0.5, 0.5, (c,)).astype(np.float32),
    }
    wl = rng.uniform(-1, 1, shape).astype(np.float32)

    def graph(t):
        stats = {"mean": np.zeros(c, np.float32), "var": np.ones(c, np.float32)}
        return tsum(mul(ops.batchnorm(t["x"], t["gamma"], t["beta"], stats, "train"), Tensor(wl)))

    value = lambda a: float((_batchnorm64(a["x"], a["gamma"], a["beta"]) * wl).sum())
    return graph, value, arrays


def _case_dense(rng):
    n, din, dout = int(rng.integers(1, 5)), int(rng.integers(2, 7)), int(rng.integers(2, 7))
    arrays = {
        "x": rng.uniform(-1, 1, (n, din)).astype(np.float32),
        "w": rng.uniform(-1, 1, (din, dout)).astype(np.float32),
        "b": rng.uniform(-1, 1, (dout,)).astype(np.float32),
    }
    wl = rng.uniform(-1, 1, (n, dout)).astype(np.float32)
    graph = lambda t: tsum(mul(ops.dense(t["x"], t["w"], t["b"]), Tensor(wl)))
    value = lambda a: float(
        ((a["x"].astype(np.float64) @ a["w"] + a["b"]) * wl).sum()
    )
    return graph, value, arrays


def _case_relu(rng):
    shape = (int(rng.integers(2, 5)), int(rng.integers(3, 9)))
    arrays = {"x": _away_from_zero(rng, shape)}
    wl = rng.uniform(-1, 1, shape).astype(np.float32)
    graph = lambda t: tsum(mul(ops.relu(t["x"]), Tensor(wl)))
    value = lambda a: float((np.maximum(a["x"].astype(np.float64), 0.0) * wl).sum())
    return graph, value, arrays


def _case_softmax(rng):
    shape = (int(rng.integers(2, 5)), int(rng.integers(3, 7)))
    arrays = {"x": rng.uniform(-2, 2, shape).astype(np.float32)}
    wl = rng.uniform(-1, 1, shape).astype(np.float32)
    graph = lambda t: tsum(mul(ops.softmax(t["x"]), Tensor(wl)))
    value = lambda a: float((_softmax64(a["x"]) * wl).sum())
    return graph, value, arrays


def _case_cross_entropy(rng):
    n, classes = int(rng.integers(2, 6)), int(rng.integers(3, 7))
    arrays = {"x": rng.uniform(-2, 2, (n, classes)).astype(np.float32)}
    labels = rng.integers(0, classes, size=n)
    graph = lambda t: ops.cross_entropy(ops.softmax(t["x"]), labels)
    value = lambda a: _ce64(_softmax64(a["x"]), labels)
    return graph, value, arrays


def _case_mse(rng):
    shape = (int(rng.integers(1, 4)), int(rng.integers(2, 6)), int(rng.integers(2, 6)))
    arrays = {
        "a": rng.uniform(-1, 1, shape).astype(np.float32),
        "b": rng.uniform(-1, 1, shape).astype(np.float32),
    }
    graph = lambda t: ops.mse(t["a"], t["b"])
    d64 = lambda a: a["a"].astype(np.float64) - a["b"].astype(np.float64)
    value = lambda a: float((d64(a) ** 2).mean())
    return graph, value, arrays


CASE_GENERATORS = {
    "conv2d": _case_conv,
    "transposed_conv2d": _case_tconv,
    "maxpool2d": _case_maxpool,
    "unpool_nearest": _case_unpool,
    "batchnorm": _case_batchnorm,
    "dense": _case_dense,
    "relu": _case_relu,
    "softmax": _case_softmax,
    "cross_entropy": _case_cross_entropy,
    "mse": _case_mse,
}


def check_layer(name: str, seed: int, cases: int = 20) -> LayerReport:
    gen = CASE_GENERATORS[name]
    worst = 0.0
    for case in range(cases):
        rng = seeded_rng(seed, "gradcheck", name, case)
        graph_fn, value_fn, arrays = gen(rng)
        worst = max(worst, _check(graph_fn, value_fn, arrays))
    return LayerReport(name=name, cases=cases, max_rel_err=worst)


def check_all(seed: int = 0, cases: int = 20) -> list[LayerReport]:
    return [check_layer(name, seed, cases) for name in CASE_GENERATORS]
