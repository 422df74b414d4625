"""Minimal layer/loss/optimiser stack for the image networks."""

from .layers import (Conv2d, ConvTranspose2d, Flatten, Layer, Linear, ReLU, ShapeError,
                     StateError, Tanh)
from .losses import mse_loss, multilabel_soft_margin_loss
from .network import (CheckpointError, Network, build_cae, build_classifier, build_regressor,
                      load_checkpoint, predict, save_checkpoint)
from .optim import AdamState, adam_step
from .train import TrainConfig, TrainResult, TrainingDiverged, batched, dataset_loss, train

__all__ = [
    "AdamState", "CheckpointError", "Conv2d", "ConvTranspose2d", "Flatten", "Layer", "Linear",
    "Network", "ReLU", "ShapeError", "StateError", "Tanh", "TrainConfig", "TrainResult",
    "TrainingDiverged", "adam_step", "batched", "build_cae", "build_classifier",
    "build_regressor", "dataset_loss", "load_checkpoint", "mse_loss",
    "multilabel_soft_margin_loss", "predict", "save_checkpoint", "train",
]
