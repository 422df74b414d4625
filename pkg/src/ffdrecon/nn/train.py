"""Mini-batch training loop."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .losses import mse_loss, multilabel_soft_margin_loss
from .network import Network
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

LOSSES = {"mse": mse_loss, "multilabel_soft_margin": multilabel_soft_margin_loss}


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, value, stage=""):
        where = f"{stage} " if stage else ""
        super().__init__(f"{where}training diverged at epoch {epoch}: loss={value}")
        self.epoch = epoch
        self.stage = stage


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 0.0
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    network: Network
    losses: list = field(default_factory=list)
    optimizer: AdamState | None = None


def batched(network: Network, x, batch_size=64, stop=None, encode=False):
    """Forward ``x`` in fixed-order chunks and concatenate."""
    outs = []
    for start in range(0, len(x), batch_size):
        chunk = x[start:start + batch_size]
        outs.append(network.encode(chunk) if encode else network.forward(chunk, stop=stop))
    return np.concatenate(outs, axis=0)


def dataset_loss(network: Network, x, y, loss="mse", batch_size=64) -> float:
    fn = LOSSES[loss]
    total = 0.0
    for start in range(0, len(x), batch_size):
        xb, yb = x[start:start + batch_size], y[start:start + batch_size]
        total += fn(network.forward(xb), yb)[0] * len(xb)
    return total / len(x)


def train(network: Network, x, y, loss="mse", config: TrainConfig | None = None,
          stage="", progress=None) -> TrainResult:
    """Fit ``network`` to ``(x, y)`` with Adam; shuffling is seeded by
    ``config.seed`` so identical inputs give identical parameter trajectories.

    Returns the network (trained in place) and the mean training loss of each
    epoch.
    """
    config = config or TrainConfig()
    fn = LOSSES[loss]
    x = np.asarray(x, dtype=network.dtype)
    y = np.asarray(y, dtype=network.dtype)
    if not len(x):
        raise ValueError("empty training set")
    if len(x) != len(y):
        raise ValueError(f"{len(x)} inputs but {len(y)} targets")
    rng = np.random.default_rng(config.seed)
    opt = AdamState(lr=config.lr, weight_decay=config.weight_decay)
    params = network.parameters()
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), config.batch_size):
            idx = order[start:start + config.batch_size]
            pred = network.forward(x[idx])
            value, grad = fn(pred, y[idx])
            if not np.isfinite(value):
                raise TrainingDiverged(epoch, value, stage)
            network.backward(grad.astype(network.dtype, copy=False))
            adam_step(opt, params, network.gradients())
            total += value * len(idx)
        losses.append(total / len(x))
        network.step_count = opt.step_count
        if progress is not None:
            progress(epoch, losses[-1])
        log.debug("%s epoch %d loss %.6g", stage or network.name, epoch, losses[-1])
    return TrainResult(network, losses, opt)
