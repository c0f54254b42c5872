"""End-to-end forecasting model.

Pipeline: joint embedding of exogenous and lagged endogenous inputs,
projection onto learnable wavelet atoms, coherence attention across the
atoms, a unitary evolvement step over the atom axis, reconstruction back
to a sequence, and a three-layer convolutional decoder. Five ablation
toggles cut individual stages out of the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import wavelet
from .attention import MvcaWeights, mvca_forward
from .autodiff import Tensor
from .koopman import KoopmanParams, build_operator, evolve

__all__ = ["ModelConfig", "SonnetModel", "expected_param_count"]


@dataclass
class ModelConfig:
    lookback: int
    horizon: int
    n_exog: int
    width: int = 64          # hidden dimension d
    num_atoms: int = 8       # wavelet atom / attention head count K
    alpha: float = 0.5       # exogenous share of the embedding width
    delay: int = 0           # reporting delay applied to the endogenous input
    dropout_rate: float = 0.0
    seed: int = 42
    no_coher: bool = False
    no_mlp: bool = False
    no_mvca: bool = False
    no_embed: bool = False
    no_koop: bool = False

    def __post_init__(self):
        if self.horizon < 1 or self.lookback < 1:
            raise ValueError("lookback and horizon must be >= 1")
        if self.width < 2:
            raise ValueError("hidden width must be >= 2")
        if self.delay < 0:
            raise ValueError("delay must be >= 0")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        ad_ = self.alpha * self.width
        if abs(ad_ - round(ad_)) > 1e-9:
            raise ValueError(
                f"alpha * width must be an integer, got {self.alpha} * {self.width}")

    @property
    def exog_width(self) -> int:
        return int(round(self.alpha * self.width))

    @property
    def endo_width(self) -> int:
        return self.width - self.exog_width


def _xavier(rng, shape):
    fan_in, fan_out = shape[0], shape[-1]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def _xavier_conv(rng, c_out, c_in, k):
    bound = np.sqrt(6.0 / (c_in * k + c_out * k))
    return rng.uniform(-bound, bound, size=(c_out, c_in, k))


class SonnetModel:
    """Holds every learnable tensor and runs the forward pipeline."""

    DECODER_KERNELS = (5, 3, 3)
    DECODER_PADDINGS = (2, 1, 1)

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        C, d, K, L, H = cfg.n_exog, cfg.width, cfg.num_atoms, cfg.lookback, cfg.horizon

        if cfg.no_embed:
            self.w_joint = Tensor(_xavier(rng, (C + 1, d)), requires_grad=True)
            self.w_x = self.w_y = None
        else:
            self.w_joint = None
            self.w_x = (Tensor(_xavier(rng, (C, cfg.exog_width)), requires_grad=True)
                        if cfg.exog_width > 0 else None)
            self.w_y = (Tensor(_xavier(rng, (1, cfg.endo_width)), requires_grad=True)
                        if cfg.endo_width > 0 else None)

        self.wavelet_bank = wavelet.WaveletBank(K, L, d, rng)
        self.mvca = None if cfg.no_mvca else MvcaWeights(d, cfg.dropout_rate, rng)
        self.koopman = None if cfg.no_koop else KoopmanParams(K, rng)

        chans = (d, 4 * H, 2 * H, H)
        self.conv_w = []
        self.conv_b = []
        for i, k in enumerate(self.DECODER_KERNELS):
            self.conv_w.append(Tensor(_xavier_conv(rng, chans[i + 1], chans[i], k),
                                      requires_grad=True))
            self.conv_b.append(Tensor(np.zeros(chans[i + 1]), requires_grad=True))
        self.w_z = Tensor(_xavier(rng, (H,)), requires_grad=True)

    # -- parameter bookkeeping ------------------------------------------
    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        if self.w_joint is not None:
            params["embed.joint"] = self.w_joint
        if self.w_x is not None:
            params["embed.exog"] = self.w_x
        if self.w_y is not None:
            params["embed.endo"] = self.w_y
        params.update(self.wavelet_bank.parameters())
        if self.mvca is not None:
            params.update(self.mvca.parameters())
        if self.koopman is not None:
            params.update(self.koopman.parameters())
        for i, (w, b) in enumerate(zip(self.conv_w, self.conv_b), start=1):
            params[f"decoder.conv{i}.w"] = w
            params[f"decoder.conv{i}.b"] = b
        params["decoder.out"] = self.w_z
        return params

    def num_params(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def zero_grad(self):
        for p in self.parameters().values():
            p.zero_grad()

    # -- pipeline stages -------------------------------------------------
    def embed(self, x: Tensor, y: Tensor) -> Tensor:
        """Joint embedding: E = [X W_x, y W_y] on the feature axis.

        x: (..., L, C), y: (..., L). Returns (..., L, d).
        """
        cfg = self.cfg
        y_col = ad.reshape(y, y.shape + (1,))
        if cfg.no_embed:
            z = ad.concat([x, y_col], axis=-1)
            return ad.matmul(z, self.w_joint)
        blocks = []
        if self.w_x is not None:
            blocks.append(ad.matmul(x, self.w_x))
        if self.w_y is not None:
            blocks.append(ad.matmul(y_col, self.w_y))
        return blocks[0] if len(blocks) == 1 else ad.concat(blocks, axis=-1)

    def decode(self, r: Tensor) -> Tensor:
        """Convolutional decoder: (..., L, d) -> (..., H) forecast."""
        H = self.cfg.horizon
        axes = tuple(range(r.ndim - 2)) + (r.ndim - 1, r.ndim - 2)
        h = ad.transpose(r, axes)  # features become channels over time
        for i, (w, b, pad) in enumerate(
                zip(self.conv_w, self.conv_b, self.DECODER_PADDINGS)):
            h = ad.conv1d(h, w, b, padding=pad)
            if i < len(self.conv_w) - 1:
                h = ad.gelu(h)
        z_out = ad.adaptive_avg_pool(h, H)  # (..., H, H): channels x pooled time
        return ad.matmul(z_out, self.w_z)

    def forward(self, x, y, training: bool = False, step: int = 0) -> Tensor:
        """Predict the next H steps from one window or a batch of windows.

        x: (L, C) or (B, L, C); y: (L,) or (B, L). Output (H,) or (B, H).
        """
        cfg = self.cfg
        x = x if isinstance(x, Tensor) else Tensor(x)
        y = y if isinstance(y, Tensor) else Tensor(y)
        squeeze = x.ndim == 2
        if squeeze:
            x = ad.reshape(x, (1,) + x.shape)
            y = ad.reshape(y, (1,) + y.shape)
        if x.shape[-2:] != (cfg.lookback, cfg.n_exog) or y.shape[-1] != cfg.lookback:
            raise ValueError(
                f"inputs {x.shape}/{y.shape} do not match config "
                f"(L={cfg.lookback}, C={cfg.n_exog})")

        e = self._checked(self.embed(x, y), "embed")
        atoms = self._checked(wavelet.make_atoms(self.wavelet_bank), "wavelet atoms")
        p = self._checked(wavelet.project(e, atoms), "wavelet projection")
        if self.mvca is None:
            o = p
        else:
            rng = ad.dropout_rng(cfg.seed, layer_id=1, step=step)
            o = self._checked(
                mvca_forward(p, self.mvca, rng=rng, training=training,
                             no_coher=cfg.no_coher, no_mlp=cfg.no_mlp),
                "attention")
        if self.koopman is None:
            evolved_real = o
        else:
            op = build_operator(self.koopman)
            evolved_real = self._checked(evolve(o, op).re, "evolvement")
        r = self._checked(wavelet.reconstruct(evolved_real, atoms), "reconstruction")
        y_hat = self._checked(self.decode(r), "decoder")
        return ad.reshape(y_hat, y_hat.shape[1:]) if squeeze else y_hat

    __call__ = forward

    @staticmethod
    def _checked(t: Tensor, stage: str) -> Tensor:
        if not np.all(np.isfinite(t.data)):
            raise FloatingPointError(f"non-finite values produced by {stage}")
        return t


def expected_param_count(cfg: ModelConfig) -> int:
    """Closed-form learnable count as a function of the config alone."""
    C, d, K, H = cfg.n_exog, cfg.width, cfg.num_atoms, cfg.horizon
    if cfg.no_embed:
        n = (C + 1) * d
    else:
        n = C * cfg.exog_width + cfg.endo_width
    n += 3 * K * d                                   # wavelet parameter triples
    if not cfg.no_mvca:
        n += 4 * d * d + 2 * (d * d + d)             # projections + MLP
    if not cfg.no_koop:
        n += 2 * K * K + K                           # complex seed + phases
    n += 4 * H * d * 5 + 4 * H                       # decoder conv 1
    n += 2 * H * 4 * H * 3 + 2 * H                   # decoder conv 2
    n += H * 2 * H * 3 + H                           # decoder conv 3
    n += H                                           # output projection
    return n
