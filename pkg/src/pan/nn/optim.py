"""Adam with bias correction, one state per parameter set."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: dict[str, Tensor], beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p.data) for k, p in params.items()},
        v={k: np.zeros_like(p.data) for k, p in params.items()},
        t=0,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """One in-place update of every parameter from its gradient."""
    if set(params) != set(state.m):
        raise ValueError("parameter set does not match optimizer state")
    state.t += 1
    c1 = 1.0 / (1.0 - state.beta1 ** state.t)
    c2 = 1.0 / (1.0 - state.beta2 ** state.t)
    for k, p in params.items():
        g = grads[k]
        m = state.m[k]
        v = state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= lr * (m * c1) / (np.sqrt(v * c2) + state.eps)
