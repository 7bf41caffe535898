"""Adam with bias correction and per-group learning rates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Tensor


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[int, np.ndarray] = field(default_factory=dict)
    v: dict[int, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Tensor], grads: Mapping[Tensor, np.ndarray], state: AdamState,
              lr_scale: Mapping[int, float] | None = None) -> None:
    """Update ``params`` in place. Parameters missing from ``grads`` see a zero gradient.

    Moments are keyed by position in ``params``, so the list order must stay fixed.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for k, p in enumerate(params):
        g = grads.get(p)
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(k)
        if m is None:
            m = state.m[k] = np.zeros_like(p.data)
            state.v[k] = np.zeros_like(p.data)
        v = state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        lr = state.lr * (lr_scale.get(k, 1.0) if lr_scale else 1.0)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


class Adam:
    """Thin stateful wrapper: ``Adam([(params, lr), ...])`` or ``Adam(params, lr)``."""

    def __init__(self, params: Iterable[Tensor] | Sequence[tuple[Sequence[Tensor], float]],
                 lr: float = 1e-4, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        items = list(params)
        if items and isinstance(items[0], tuple):
            groups = items
        else:
            groups = [(items, lr)]
        self.params: list[Tensor] = []
        self.lr_scale: dict[int, float] = {}
        base = (groups[0][1] if groups else lr) or 1.0
        for group, group_lr in groups:
            for p in group:
                self.lr_scale[len(self.params)] = group_lr / base
                self.params.append(p)
        self.state = AdamState(lr=base, beta1=betas[0], beta2=betas[1], eps=eps)

    def step(self, grads: Mapping[Tensor, np.ndarray]) -> None:
        adam_step(self.params, grads, self.state, self.lr_scale)
