"""Learnable wavelet atoms: Gaussian envelope times a chirped cosine.

Each of the K atoms is parameterized by three length-d vectors
controlling envelope width, linear frequency and quadratic frequency
(chirp). Atoms are rematerialized from the parameters on every forward
pass so gradients reach them.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = ["WaveletBank", "time_grid", "make_atoms", "project", "reconstruct"]


def time_grid(length: int) -> np.ndarray:
    """Normalized time steps t_i = i/(L-1) on [0, 1]; t = {0} when L == 1."""
    if length < 1:
        raise ValueError("time grid needs length >= 1")
    if length == 1:
        return np.zeros(1)
    return np.arange(length) / (length - 1)


class WaveletBank:
    """K atom parameter triples (envelope, frequency, chirp), each of length d."""

    def __init__(self, num_atoms: int, window_len: int, width: int,
                 rng: np.random.Generator):
        self.num_atoms = num_atoms
        self.window_len = window_len
        self.width = width
        self.w_alpha = Tensor(rng.standard_normal((num_atoms, width)), requires_grad=True)
        self.w_beta = Tensor(rng.standard_normal((num_atoms, width)), requires_grad=True)
        self.w_gamma = Tensor(rng.standard_normal((num_atoms, width)), requires_grad=True)
        self._t = time_grid(window_len)

    def parameters(self) -> dict[str, Tensor]:
        return {"wavelet.alpha": self.w_alpha, "wavelet.beta": self.w_beta,
                "wavelet.gamma": self.w_gamma}


def make_atoms(bank: WaveletBank) -> Tensor:
    """Materialize the K x d x L atom tensor from the bank's parameters.

    M[k, j, i] = exp(-alpha[k,j] * t_i^2) * cos(beta[k,j] * t_i + gamma[k,j] * t_i^2)
    """
    for w in (bank.w_alpha, bank.w_beta, bank.w_gamma):
        if not np.all(np.isfinite(w.data)):
            raise FloatingPointError("non-finite wavelet parameters")
    t = Tensor(bank._t[None, None, :])      # (1, 1, L)
    t2 = Tensor((bank._t ** 2)[None, None, :])
    alpha = ad.reshape(bank.w_alpha, (bank.num_atoms, bank.width, 1))
    beta = ad.reshape(bank.w_beta, (bank.num_atoms, bank.width, 1))
    gamma = ad.reshape(bank.w_gamma, (bank.num_atoms, bank.width, 1))
    envelope = ad.texp(-(alpha * t2))
    phase = beta * t + gamma * t2
    return envelope * ad.tcos(phase)


def project(embedding: Tensor, atoms: Tensor) -> Tensor:
    """Project an (..., L, d) embedding onto each atom: P[k] = E * M_k^T.

    Returns (..., K, L, d).
    """
    L, d = embedding.shape[-2], embedding.shape[-1]
    K = atoms.shape[0]
    if atoms.shape != (K, d, L):
        raise ValueError(f"atoms shape {atoms.shape} does not match embedding {embedding.shape}")
    m_t = ad.transpose(atoms, (0, 2, 1))  # (K, L, d)
    e = ad.reshape(embedding, embedding.shape[:-2] + (1, L, d))
    return e * m_t


def reconstruct(evolved_real: Tensor, atoms: Tensor) -> Tensor:
    """Aggregate wavelet-space states back to a sequence.

    evolved_real: (..., K, L, d); returns sum_k evolved_real[k] * M_k^T of
    shape (..., L, d).
    """
    K, d, L = atoms.shape
    if evolved_real.shape[-3:] != (K, L, d):
        raise ValueError(
            f"evolved state {evolved_real.shape} does not match atoms {atoms.shape}")
    m_t = ad.transpose(atoms, (0, 2, 1))  # (K, L, d)
    return ad.tsum(evolved_real * m_t, axis=-3)
