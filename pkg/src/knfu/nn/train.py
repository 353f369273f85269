"""Single-step SGD training and finite-difference gradient checking."""

from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from .losses import distill_loss_and_grad
from .model import backprop, forward_logits

GRAD_CAP = 5.0


@dataclass
class SgdState:
    """Optimizer knobs plus a counter of clipped gradient components."""

    learning_rate: float = 0.01
    batch_size: int = 16
    clip_events: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InputError("learning rate must be positive")
        if self.batch_size < 1:
            raise InputError("batch size must be a positive integer")


def backward_step(model, batch, labels, distill_target, lam, sgd):
    """One SGD step on CE + lam^2 * KL; returns the pre-step loss.

    `distill_target` rows must align with the batch and be present exactly
    when lam > 0. Gradient components beyond GRAD_CAP are clipped and
    counted on `sgd.clip_events`.
    """
    if distill_target is not None and len(distill_target) != len(batch):
        raise InputError("distillation target rows do not align with batch")
    logits, caches = forward_logits(model, batch, keep_caches=True)
    loss, dlogits = distill_loss_and_grad(logits, labels, distill_target, lam)
    grad = backprop(model, caches, dlogits)
    over = np.abs(grad) > GRAD_CAP
    if over.any():
        sgd.clip_events += int(over.sum())
        np.clip(grad, -GRAD_CAP, GRAD_CAP, out=grad)
    model.params -= sgd.learning_rate * grad
    return loss


def _loss_only(model, batch, labels, target, lam):
    logits, _ = forward_logits(model, batch)
    loss, _ = distill_loss_and_grad(logits, labels, target, lam)
    return loss


def gradient_check(model, batch, labels=None, lam=0.0, target=None, step=1e-5):
    """Max relative error between analytic and central-difference gradients.

    Relative error per parameter is |a - n| / max(|a|, |n|, 1e-8). The model
    is restored to its original parameters before returning. O(P) forward
    passes, so only use on small models.
    """
    logits, caches = forward_logits(model, batch, keep_caches=True)
    _, dlogits = distill_loss_and_grad(logits, labels, target, lam)
    analytic = backprop(model, caches, dlogits)

    params = model.params
    numeric = np.empty_like(analytic)
    for i in range(params.size):
        orig = params[i]
        params[i] = orig + step
        hi = _loss_only(model, batch, labels, target, lam)
        params[i] = orig - step
        lo = _loss_only(model, batch, labels, target, lam)
        params[i] = orig
        numeric[i] = (hi - lo) / (2.0 * step)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
