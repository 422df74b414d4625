"""Loss functions returning ``(value, gradient w.r.t. the prediction)``."""

import numpy as np

from .layers import ShapeError


def mse_loss(pred, target):
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse: shapes differ {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff


def _log_sigmoid(x):
    # log(sigmoid(x)) = -softplus(-x), stable for large |x|
    return -np.logaddexp(0.0, -x)


def multilabel_soft_margin_loss(logits, target):
    """Per-class logistic loss, averaged over classes and then over the batch.

    ``logits`` and ``target`` are ``(C,)`` or ``(B, C)``; targets in {0, 1}.
    """
    x = np.asarray(logits)
    y = np.asarray(target, dtype=x.dtype)
    if x.shape != y.shape:
        raise ShapeError(f"soft margin: shapes differ {x.shape} vs {y.shape}")
    per = -(y * _log_sigmoid(x) + (1.0 - y) * _log_sigmoid(-x))
    sig = np.exp(_log_sigmoid(x))
    return float(per.mean()), (sig - y) / per.size
