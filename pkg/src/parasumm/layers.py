"""Shared neural building blocks: init, linear maps, sinusoids, attention."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


def xavier_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_out, fan_in = shape[0], shape[-1]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def embedding_init(rng: np.random.Generator, vocab: int, d: int) -> np.ndarray:
    return rng.normal(0.0, d ** -0.5, size=(vocab, d))


@dataclass
class DropoutCtx:
    """Active-dropout context; absent (None) at evaluation time."""
    p: float
    rng: np.random.Generator


def maybe_drop(x: Tensor, drop: DropoutCtx | None) -> Tensor:
    return T.dropout(x, drop.p, drop.rng) if drop is not None else x


def linear(x: Tensor, w: Tensor, b: Tensor | None = None,
           drop: DropoutCtx | None = None) -> Tensor:
    """x @ w^T (+ b), with dropout applied to the input while training."""
    x = maybe_drop(x, drop)
    wt = T.transpose(w, tuple(range(w.ndim - 2)) + (w.ndim - 1, w.ndim - 2))
    out = T.matmul(x, wt)
    if b is not None:
        out = T.add(out, b)
    return out


def sinusoid_table(positions: np.ndarray, dim: int) -> np.ndarray:
    """Sine/cosine position codes: sin at even indices, cos at odd.

    For a fixed offset, codes at shifted positions are a linear (rotation)
    map of the original ones, so the table extrapolates past any length
    seen in training.
    """
    if dim % 2 != 0:
        raise ValueError(f"sinusoid dimension must be even, got {dim}")
    positions = np.asarray(positions, dtype=np.float64)
    half = dim // 2
    freqs = 1.0 / (10000.0 ** (2.0 * np.arange(half) / dim))
    angles = positions[:, None] * freqs[None, :]
    table = np.zeros((len(positions), dim))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table


def split_heads(x: Tensor, n_head: int) -> Tensor:
    """[..., T, d] -> [..., h, T, d/h]"""
    *lead, t, d = x.shape
    x = T.reshape(x, (*lead, t, n_head, d // n_head))
    axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
    return T.transpose(x, axes)


def merge_heads(x: Tensor) -> Tensor:
    """[..., h, T, d/h] -> [..., T, d]"""
    *lead, h, t, dh = x.shape
    axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
    return T.reshape(T.transpose(x, axes), (*lead, t, h * dh))


NEG_BIG = -1e9  # additive mask value; exp(NEG_BIG - max) underflows to exactly 0


def causal_mask(n: int) -> np.ndarray:
    return np.triu(np.full((n, n), NEG_BIG), k=1)


def key_padding_mask(real: np.ndarray) -> np.ndarray:
    """0 where `real` is true, NEG_BIG where padded."""
    return np.where(np.asarray(real, dtype=bool), 0.0, NEG_BIG)


def multi_head_attention(q_in: Tensor, kv_in: Tensor, wq: Tensor, wk: Tensor,
                         wv: Tensor, wo: Tensor, n_head: int,
                         mask: np.ndarray | None = None,
                         drop: DropoutCtx | None = None,
                         trace: list | None = None) -> Tensor:
    """Scaled dot-product attention over the last two axes.

    `q_in` is [..., Tq, d], `kv_in` is [..., Tk, d] with identical leading
    dims.  `mask` is additive and broadcast against the score tensor
    [..., h, Tq, Tk]; use it for both padding and causal structure.
    """
    d = q_in.shape[-1]
    dh = d // n_head
    q = split_heads(linear(q_in, wq, drop=drop), n_head)
    k = split_heads(linear(kv_in, wk, drop=drop), n_head)
    v = split_heads(linear(kv_in, wv, drop=drop), n_head)
    kt = T.transpose(k, tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2))
    scores = T.mul(T.matmul(q, kt), dh ** -0.5)
    if mask is not None:
        scores = T.add(scores, Tensor(mask))
    attn = T.softmax(scores, axis=-1)
    if trace is not None:
        trace.append(attn.data)
    ctx = merge_heads(T.matmul(attn, v))
    return linear(ctx, wo, drop=drop)


def feed_forward(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor,
                 drop: DropoutCtx | None = None) -> Tensor:
    """Two-layer position-wise network with ReLU in the middle."""
    return linear(T.relu(linear(x, w1, b1, drop=drop)), w2, b2, drop=drop)
