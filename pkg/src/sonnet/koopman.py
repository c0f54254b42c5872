"""Unitary evolvement operator over the atom axis.

The operator is rebuilt each forward pass from a learnable complex seed
matrix (orthonormalized by Householder QR) and a learnable phase vector:
K_op = U diag(exp(i p)) U^H. Unitarity holds by construction for any
parameter values, so applying the operator never amplifies the state.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .complex_ops import ComplexTensor, cmatmul, qr_unitary

__all__ = ["KoopmanParams", "build_operator", "evolve"]


class KoopmanParams:
    """Learnable seed matrix and phase vector for a K x K unitary operator."""

    def __init__(self, num_atoms: int, rng: np.random.Generator):
        std = 1.0 / np.sqrt(num_atoms)
        self.num_atoms = num_atoms
        self.seed_re = Tensor(rng.normal(0.0, std, (num_atoms, num_atoms)),
                              requires_grad=True)
        self.seed_im = Tensor(rng.normal(0.0, std, (num_atoms, num_atoms)),
                              requires_grad=True)
        # zero phases: identity-like start
        self.phase = Tensor(np.zeros(num_atoms), requires_grad=True)

    def parameters(self) -> dict[str, Tensor]:
        return {"koopman.seed_re": self.seed_re, "koopman.seed_im": self.seed_im,
                "koopman.phase": self.phase}


def build_operator(params: KoopmanParams) -> ComplexTensor:
    """K_op = U diag(e^{i p}) U^H with U the unitary QR factor of the seed."""
    seed = ComplexTensor(params.seed_re, params.seed_im)
    if not (np.all(np.isfinite(seed.re.data)) and np.all(np.isfinite(seed.im.data))):
        raise FloatingPointError("non-finite operator seed")
    u = qr_unitary(seed)
    v = ComplexTensor(ad.tcos(params.phase), ad.tsin(params.phase))  # e^{i p}
    ud = ComplexTensor(u.re * v.re - u.im * v.im, u.re * v.im + u.im * v.re)
    return cmatmul(ud, u.H)


def evolve(state: Tensor, op: ComplexTensor) -> ComplexTensor:
    """Apply the operator along the atom axis of a (..., K, L, d) real state.

    The state is lifted to complex with zero imaginary part, the trailing
    axes are flattened so the operator multiplies K x (L*d), and the
    result is reshaped back.
    """
    K = op.shape[0]
    if state.shape[-3] != K:
        raise ValueError(f"state atom axis {state.shape} does not match operator {op.shape}")
    L, d = state.shape[-2], state.shape[-1]
    flat_shape = state.shape[:-3] + (K, L * d)
    flat = ad.reshape(state, flat_shape)
    lifted = ComplexTensor.from_real(flat)
    out = cmatmul(op, lifted)  # broadcasts over leading batch axes
    return out.reshape(state.shape[:-3] + (K, L, d))
