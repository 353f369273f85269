"""Softmax, cross-entropy and KL distillation losses.

All logs are natural, matching the distance convention used by the fusion
center. Probabilities are clamped by EPS_LOG inside every log so degenerate
one-hot rows stay finite.
"""

import numpy as np

from ..errors import InputError

EPS_LOG = 1e-12


def softmax(logits, temperature=1.0):
    """Row-wise temperature softmax; temperature must be positive."""
    if temperature <= 0:
        raise InputError(f"temperature must be positive, got {temperature}")
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sharpen(probs, temperature):
    """Re-soften probability rows at the given temperature.

    Treats log-probabilities as logits: softmax(log(p) / T). Temperature 1
    returns the input unchanged so exact targets stay exact.
    """
    if temperature == 1.0:
        return probs
    return softmax(np.log(np.clip(probs, EPS_LOG, None)), temperature)


def ce_loss(predictions, labels):
    """Mean negative log-probability of the true class.

    Zero exactly when every true-class probability is 1; a zero probability
    is clamped to EPS_LOG rather than producing infinity.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels)
    if predictions.ndim != 2 or predictions.shape[0] != labels.shape[0]:
        raise InputError("predictions and labels disagree on sample count")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= predictions.shape[1]:
        raise InputError("label outside [0, C)")
    p = np.clip(predictions[np.arange(len(labels)), labels], EPS_LOG, 1.0)
    return float(np.mean(-np.log(p)))


def kl_loss(student, target):
    """Mean over rows of sum_j target_j * ln(target_j / student_j), in nats.

    Zero entries are clamped inside the logs only, so kl_loss(p, p) is
    exactly zero. The result is floored at 0 to absorb rounding on
    near-identical rows.
    """
    student = np.asarray(student, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if student.shape != target.shape:
        raise InputError(f"shape mismatch {student.shape} vs {target.shape}")
    log_t = np.log(np.clip(target, EPS_LOG, None))
    log_s = np.log(np.clip(student, EPS_LOG, None))
    rows = np.sum(target * (log_t - log_s), axis=-1)
    return max(float(np.mean(rows)), 0.0)


def distill_loss_and_grad(logits, labels, target, lam):
    """Composite loss CE(T=1) + lam^2 * KL at temperature lam, with its
    gradient w.r.t. the logits.

    Either term can be switched off: labels=None drops the CE term,
    lam=0 (with target=None) drops the distillation term. The KL term
    softens both sides at temperature lam and is weighted by lam^2.
    """
    batch = logits.shape[0]
    loss = 0.0
    grad = np.zeros_like(logits)
    if labels is not None:
        probs = softmax(logits)
        loss += ce_loss(probs, labels)
        g = probs.copy()
        g[np.arange(batch), np.asarray(labels)] -= 1.0
        grad += g / batch
    if lam > 0.0:
        if target is None:
            raise InputError("lam > 0 requires a distillation target")
        soft_student = softmax(logits, temperature=lam)
        soft_target = sharpen(target, lam)
        loss += lam * lam * kl_loss(soft_student, soft_target)
        grad += lam * (soft_student - soft_target) / batch
    elif target is not None:
        raise InputError("distillation target given but lam is 0")
    return loss, grad
