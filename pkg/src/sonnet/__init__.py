"""Spectral multivariable time-series forecasting toolkit."""

from .autodiff import Tensor, Tape, backward, no_grad
from .complex_ops import ComplexTensor, qr_unitary, rfft_last_axis
from .model import ModelConfig, SonnetModel
from .trainer import TrainConfig, train, grid_search

__all__ = [
    "Tensor", "Tape", "backward", "no_grad",
    "ComplexTensor", "qr_unitary", "rfft_last_axis",
    "ModelConfig", "SonnetModel",
    "TrainConfig", "train", "grid_search",
]

__version__ = "0.1.0"
