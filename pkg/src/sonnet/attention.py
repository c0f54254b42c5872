"""Multivariable coherence attention.

Attention weights over time come from the spectral coherence between
query and key rows, computed in the frequency domain along the feature
axis. Each wavelet atom acts as one attention head with shared
projection matrices. Also provides the 2-d adapter that lets the block
replace a standard attention layer operating on (time, features) input.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .complex_ops import rfft_last_axis

__all__ = ["MvcaWeights", "spectral_coherence", "mvca_forward", "mvca_2d_adapter"]

COHERENCE_EPS = 1e-6


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


class MvcaWeights:
    """Shared projections, output matrix and the residual two-layer MLP."""

    def __init__(self, width: int, dropout_rate: float, rng: np.random.Generator,
                 eps: float = COHERENCE_EPS):
        if not (0.0 <= dropout_rate < 1.0):
            raise ValueError(f"dropout rate must be in [0, 1), got {dropout_rate}")
        if eps <= 0:
            raise ValueError("coherence stabilizer must be positive")
        self.width = width
        self.dropout_rate = dropout_rate
        self.eps = eps
        self.w_q = Tensor(_xavier(rng, width, width), requires_grad=True)
        self.w_k = Tensor(_xavier(rng, width, width), requires_grad=True)
        self.w_v = Tensor(_xavier(rng, width, width), requires_grad=True)
        self.w_out = Tensor(_xavier(rng, width, width), requires_grad=True)
        self.mlp_w1 = Tensor(_xavier(rng, width, width), requires_grad=True)
        self.mlp_b1 = Tensor(np.zeros(width), requires_grad=True)
        self.mlp_w2 = Tensor(_xavier(rng, width, width), requires_grad=True)
        self.mlp_b2 = Tensor(np.zeros(width), requires_grad=True)

    def parameters(self) -> dict[str, Tensor]:
        return {
            "mvca.w_q": self.w_q, "mvca.w_k": self.w_k, "mvca.w_v": self.w_v,
            "mvca.w_out": self.w_out,
            "mvca.mlp_w1": self.mlp_w1, "mvca.mlp_b1": self.mlp_b1,
            "mvca.mlp_w2": self.mlp_w2, "mvca.mlp_b2": self.mlp_b2,
        }


def spectral_coherence(q: Tensor, k: Tensor, eps: float = COHERENCE_EPS) -> Tensor:
    """Per-row coherence between (..., L, d) query and key tensors.

    Both are taken to the frequency domain along the feature axis; the
    cross- and power-spectral densities are averaged over the frequency
    bins (complex mean taken component-wise) and combined into
    |mean_cross|^2 / (mean_qq * mean_kk + eps), a (..., L) tensor with
    entries in [0, 1).
    """
    if q.shape != k.shape:
        raise ValueError(f"query/key shape mismatch: {q.shape} vs {k.shape}")
    qf = rfft_last_axis(q)
    kf = rfft_last_axis(k)
    cross = (qf * kf.conj()).mean(axis=-1)        # complex, (..., L)
    p_qq = qf.abs2().mean(axis=-1)                # real, (..., L)
    p_kk = kf.abs2().mean(axis=-1)
    return cross.abs2() / (p_qq * p_kk + Tensor(eps))


def mvca_forward(p: Tensor, weights: MvcaWeights, rng=None, training: bool = False,
                 no_coher: bool = False, no_mlp: bool = False) -> Tensor:
    """Coherence attention over a (..., K, L, d) wavelet-space embedding.

    The K leading axis indexes attention heads. Returns the same shape.
    """
    d = p.shape[-1]
    q = ad.matmul(p, weights.w_q)
    k = ad.matmul(p, weights.w_k)
    v = ad.matmul(p, weights.w_v)
    if no_coher:
        o_r = v
    else:
        c = spectral_coherence(q, k, weights.eps)          # (..., K, L)
        a = ad.softmax(ad.scale(c, 1.0 / np.sqrt(d)), axis=-1)
        a = ad.dropout(a, weights.dropout_rate, rng, training)
        o_r = ad.reshape(a, a.shape + (1,)) * v            # broadcast over features
    if no_mlp:
        o_m = o_r
    else:
        hidden = ad.gelu(ad.matmul(o_r, weights.mlp_w1) + weights.mlp_b1)
        o_m = o_r + ad.matmul(hidden, weights.mlp_w2) + weights.mlp_b2
    return ad.matmul(o_m, weights.w_out)


def mvca_2d_adapter(e: Tensor, heads: int, weights: MvcaWeights, rng=None,
                    training: bool = False) -> Tensor:
    """Drop-in replacement for a standard attention layer on (u, v) input.

    Splits the feature axis into ``heads`` heads of width v/heads, runs
    the coherence attention with the head axis in front, and joins the
    head outputs back along the feature axis.
    """
    u, v = e.shape[-2], e.shape[-1]
    if v % heads != 0:
        raise ValueError(f"feature width {v} not divisible by {heads} heads")
    w = v // heads
    if weights.width != w:
        raise ValueError(f"weights expect head width {weights.width}, got {w}")
    batch = e.shape[:-2]
    split = ad.reshape(e, batch + (u, heads, w))
    order = tuple(range(len(batch))) + (len(batch) + 1, len(batch), len(batch) + 2)
    split = ad.transpose(split, order)                      # (..., heads, u, w)
    out = mvca_forward(split, weights, rng=rng, training=training)
    out = ad.transpose(out, order)                          # (..., u, heads, w)
    return ad.reshape(out, batch + (u, v))
