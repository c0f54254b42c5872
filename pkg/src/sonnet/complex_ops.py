"""Complex tensors composed from real autodiff primitives.

A ComplexTensor is a (re, im) pair of real Tensors; every complex
operation expands into real primitives, so reverse-mode gradients flow
without complex-valued adjoints. Includes the real FFT along the last
axis (as a pair of DFT matrix products) and a differentiable Householder
QR that returns only the unitary factor.
"""

from __future__ import annotations

import functools

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = ["ComplexTensor", "rfft_last_axis", "qr_unitary", "cmatmul"]


class ComplexTensor:
    """Dense complex tensor as separate real/imaginary buffers."""

    __slots__ = ("re", "im")

    def __init__(self, re: Tensor, im: Tensor):
        if re.shape != im.shape:
            raise ValueError(f"re/im shape mismatch: {re.shape} vs {im.shape}")
        self.re = re
        self.im = im

    @classmethod
    def from_real(cls, x: Tensor) -> "ComplexTensor":
        return cls(x, Tensor(np.zeros_like(x.data)))

    @classmethod
    def from_numpy(cls, z: np.ndarray, requires_grad=False) -> "ComplexTensor":
        z = np.asarray(z)
        return cls(
            Tensor(z.real.copy(), requires_grad=requires_grad),
            Tensor(z.imag.copy(), requires_grad=requires_grad),
        )

    @property
    def shape(self):
        return self.re.shape

    def numpy(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data

    def conj(self) -> "ComplexTensor":
        return ComplexTensor(self.re, -self.im)

    def __add__(self, other):
        return ComplexTensor(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return ComplexTensor(self.re - other.re, self.im - other.im)

    def __mul__(self, other):
        """Elementwise complex product (broadcasting)."""
        if isinstance(other, ComplexTensor):
            return ComplexTensor(
                self.re * other.re - self.im * other.im,
                self.re * other.im + self.im * other.re,
            )
        return ComplexTensor(self.re * other, self.im * other)

    __rmul__ = __mul__

    def abs2(self) -> Tensor:
        """Squared magnitude |z|^2 = re^2 + im^2, a real tensor."""
        return ad.square(self.re) + ad.square(self.im)

    def __getitem__(self, idx):
        return ComplexTensor(self.re[idx], self.im[idx])

    def reshape(self, shape):
        return ComplexTensor(ad.reshape(self.re, shape), ad.reshape(self.im, shape))

    def transpose(self, axes=None):
        return ComplexTensor(ad.transpose(self.re, axes), ad.transpose(self.im, axes))

    @property
    def H(self):
        """Conjugate transpose (last two axes for >2-d)."""
        if len(self.shape) < 2:
            return self.conj()
        axes = list(range(len(self.shape)))
        axes[-2], axes[-1] = axes[-1], axes[-2]
        return self.conj().transpose(tuple(axes))

    def mean(self, axis=None, keepdims=False):
        """Complex mean: real and imaginary parts averaged separately."""
        return ComplexTensor(
            self.re.mean(axis=axis, keepdims=keepdims),
            self.im.mean(axis=axis, keepdims=keepdims),
        )

    def __repr__(self):
        return f"ComplexTensor(shape={self.shape})"


def cmatmul(a: ComplexTensor, b: ComplexTensor) -> ComplexTensor:
    """Complex matrix product via four real matmuls."""
    re = ad.matmul(a.re, b.re) - ad.matmul(a.im, b.im)
    im = ad.matmul(a.re, b.im) + ad.matmul(a.im, b.re)
    return ComplexTensor(re, im)


@functools.lru_cache(maxsize=64)
def _rfft_matrices(n: int):
    """Cos/sin DFT matrices for bins 0..floor(n/2)."""
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    ang = 2.0 * np.pi * k * t / n
    return np.cos(ang).T.copy(), (-np.sin(ang)).T.copy()  # (n, nbins) each


def rfft_last_axis(x: Tensor) -> ComplexTensor:
    """Real FFT along the last axis; output last extent is floor(n/2)+1.

    Implemented as two dense DFT matrix products, which keeps the
    operation inside the real autodiff substrate (the transform is
    linear, so this is exact, and the axis lengths here are small).
    """
    n = x.shape[-1]
    if n < 1:
        raise ValueError("rfft_last_axis needs a non-empty last axis")
    cos_m, sin_m = _rfft_matrices(n)
    return ComplexTensor(ad.matmul(x, Tensor(cos_m)), ad.matmul(x, Tensor(sin_m)))


def _ceye(n: int) -> ComplexTensor:
    return ComplexTensor(Tensor(np.eye(n)), Tensor(np.zeros((n, n))))


_PHASE_EPS = 1e-30  # guards phase/norm divisions at exactly zero


def qr_unitary(s: ComplexTensor) -> ComplexTensor:
    """Unitary factor of the QR decomposition via Householder reflections.

    Column-phase convention: the diagonal of R is made real non-negative,
    so the factor is unique and qr_unitary(I) == I. Built from real
    primitives only, so gradients flow through the whole chain.
    """
    u, _ = qr_decompose(s)
    return u


def qr_decompose(s: ComplexTensor):
    """Full differentiable QR: returns (U unitary, R upper triangular)."""
    if len(s.shape) != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"qr expects a square matrix, got {s.shape}")
    n = s.shape[0]
    r = s
    q = _ceye(n)
    for j in range(n):
        x = r[(slice(j, None), j)]  # column tail, length n-j
        norm2 = ad.tsum(x.abs2())
        norm = ad.tsqrt(norm2 + Tensor(_PHASE_EPS))
        x0 = x[0]
        a0 = ad.tsqrt(x0.abs2() + Tensor(_PHASE_EPS))
        # phase(x0), defaulting toward +1 when x0 ~ 0
        ph = ComplexTensor(x0.re / a0, x0.im / a0)
        # v = x + phase(x0) * ||x|| * e1
        alpha = ph * ComplexTensor(norm, Tensor(0.0))
        e1 = np.zeros(n - j)
        e1[0] = 1.0
        v = x + ComplexTensor(alpha.re * Tensor(e1), alpha.im * Tensor(e1))
        vnorm2 = ad.tsum(v.abs2()) + Tensor(_PHASE_EPS)
        # pad v to full length
        if j > 0:
            zpad = Tensor(np.zeros(j))
            vf = ComplexTensor(ad.concat([zpad, v.re]), ad.concat([zpad, v.im]))
        else:
            vf = v
        # H = I - 2 v v^H / ||v||^2 applied from the left to r, right to q
        vcol = vf.reshape((n, 1))
        vrow = vf.conj().reshape((1, n))
        scale2 = Tensor(2.0) / vnorm2
        outer = cmatmul(vcol, vrow)
        outer = ComplexTensor(outer.re * scale2, outer.im * scale2)
        r = r - cmatmul(outer, r)
        q = q - cmatmul(q, outer)
    # make diag(R) real non-negative: U <- U diag(ph), R <- diag(conj(ph)) R
    diag = r[(np.arange(n), np.arange(n))]
    mag = ad.tsqrt(diag.abs2() + Tensor(_PHASE_EPS))
    ph = ComplexTensor(diag.re / mag, diag.im / mag)
    q = ComplexTensor(q.re * ph.re - q.im * ph.im, q.re * ph.im + q.im * ph.re)
    phc = ph.conj().reshape((n, 1))
    r = ComplexTensor(r.re * phc.re - r.im * phc.im, r.re * phc.im + r.im * phc.re)
    return q, r
