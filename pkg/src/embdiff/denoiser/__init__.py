"""Toy encoder-denoiser: model, synthetic tasks, and the training loop."""

from .model import (
    Batch,
    BatchGroup,
    DenoiserParameters,
    denoise,
    init_parameters,
    loss_and_grad,
    predict_length,
)
from .tasks import TASKS, make_batch
from .training import TrainConfig, train

__all__ = [
    "Batch",
    "BatchGroup",
    "DenoiserParameters",
    "TASKS",
    "TrainConfig",
    "denoise",
    "init_parameters",
    "loss_and_grad",
    "make_batch",
    "predict_length",
    "train",
]
