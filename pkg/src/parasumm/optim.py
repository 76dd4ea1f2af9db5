"""Gradient-descent optimizers over named parameter collections.

Two optimizers cover every training path in the package: Adam with an
inverse-square-root warmup schedule for the abstractive model, and Adagrad
for the paragraph ranker.  Both consume the ``grad`` buffers populated by
``Tensor.backward()`` and zero them after each step.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def warmup_lr(step: int, d_model: int, base: float = 2.0, warmup: int = 8000) -> float:
    """base * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5).

    Rises linearly for `warmup` steps, decays as step^-0.5 afterwards.
    """
    if step < 1:
        raise ValueError("schedule is defined for step >= 1")
    return base * d_model ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


class Adam:
    """Adam with bias correction and the warmup/decay schedule above."""

    def __init__(self, params: dict[str, Tensor], d_model: int, base_lr: float = 2.0,
                 warmup: int = 8000, beta1: float = 0.9, beta2: float = 0.998,
                 eps: float = 1e-8):
        self.params = params
        self.d_model = d_model
        self.base_lr = base_lr
        self.warmup = warmup
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def lr(self, step: int) -> float:
        return warmup_lr(step, self.d_model, self.base_lr, self.warmup)

    def step(self) -> float:
        """Apply one update from the accumulated grads; returns the lr used."""
        self.step_count += 1
        lr = self.lr(self.step_count)
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.step_count
        bc2 = 1.0 - b2 ** self.step_count
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.grad = None
        return lr

    # Optimizer state rides along in checkpoints as named tensors.
    def state_tensors(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {"opt.step": np.array([float(self.step_count)])}
        for name in self.params:
            out[f"opt.m.{name}"] = self.m[name]
            out[f"opt.v.{name}"] = self.v[name]
        return out

    def load_state_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        self.step_count = int(tensors["opt.step"][0])
        for name in self.params:
            self.m[name] = np.array(tensors[f"opt.m.{name}"], dtype=np.float64)
            self.v[name] = np.array(tensors[f"opt.v.{name}"], dtype=np.float64)


class Adagrad:
    """Adagrad with per-element accumulated squared gradients."""

    def __init__(self, params: dict[str, Tensor], lr: float = 0.15, eps: float = 1e-10):
        self.params = params
        self.lr = lr
        self.eps = eps
        self.accum = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            acc = self.accum[name]
            acc += g * g
            p.data -= self.lr * g / (np.sqrt(acc) + self.eps)
            p.grad = None
