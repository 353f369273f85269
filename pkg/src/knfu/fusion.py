"""Fusion-center mathematics.

Every client submits a soft-label matrix (its predictions on the shared
transfer set). The personalized `knfu` route estimates each client's class
distribution as the column mean of its matrix, measures pairwise KL
distances between those estimates, weights peers by the inverse squared
distance with a self-weight of beta times the largest peer weight, and
mixes the matrices row-wise. `fedmd` averages everyone uniformly and
`selective_fd` filters rows by ground-truth agreement and prediction
entropy before averaging.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .nn.losses import EPS_LOG

EPS_DISTANCE = 1e-6


@dataclass
class SoftLabelMatrix:
    """One client's predictions over the transfer set, simplex rows."""

    client_id: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise InputError("soft-label matrix must be 2-D")
        _check_simplex_rows(self.values, "soft-label matrix")


@dataclass
class Epd:
    """Estimated probability distribution over classes for one client."""

    client_id: int
    distribution: np.ndarray

    def __post_init__(self):
        self.distribution = np.asarray(self.distribution, dtype=np.float64)
        _check_simplex_rows(self.distribution[None, :], "EPD")


@dataclass
class WeightMatrix:
    """Pairwise distances and the derived fusion weights.

    The distance diagonal is never consumed; `normalized` rows sum to 1.
    """

    distances: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    beta: float


@dataclass
class FusedKnowledge:
    """Per-client aggregated soft-label matrices.

    `fallback_rows` marks transfer samples where a selective strategy had
    no surviving contributions and fell back to the uniform mean.
    """

    matrices: list
    fallback_rows: np.ndarray = field(default=None, repr=False)


def _check_simplex_rows(values, what, tol=1e-9):
    if len(values) == 0:
        return
    if values.min() < -tol:
        raise InputError(f"{what} has negative entries")
    sums = values.sum(axis=-1)
    if np.abs(sums - 1.0).max() > tol:
        raise InputError(f"{what} rows do not sum to 1 (max dev "
                         f"{np.abs(sums - 1.0).max():.3e})")


def compute_epd(matrix):
    """Column means of a soft-label matrix: the client's class-bias estimate."""
    if len(matrix.values) == 0:
        raise InputError("cannot estimate a class distribution from 0 rows")
    return Epd(matrix.client_id, matrix.values.mean(axis=0))


def pairwise_kl(epds):
    """Distance matrix d[n, m] = KL(p_n || p_m) in nats, zero diagonal.

    Entries are clamped by EPS_LOG inside the logs and floored at 0.
    """
    p = np.stack([e.distribution for e in epds])
    log_p = np.log(np.clip(p, EPS_LOG, None))
    # d[n, m] = sum_j p[n, j] * (log p[n, j] - log p[m, j])
    self_term = (p * log_p).sum(axis=1)
    d = self_term[:, None] - p @ log_p.T
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def weight_matrix(distances, beta, eps_distance=EPS_DISTANCE):
    """Inverse-squared-distance weights with a beta-scaled self-weight.

    Off-diagonal: w[n, m] = 1 / max(d[n, m], eps_distance)^2. Diagonal:
    beta times the row's largest peer weight. Rows are then normalized to
    sum to 1. A single client degenerates to [[1.0]].
    """
    if beta <= 0:
        raise InputError("beta must be positive")
    d = np.asarray(distances, dtype=np.float64)
    n = d.shape[0]
    if n == 1:
        return WeightMatrix(d, np.ones((1, 1)), np.ones((1, 1)), beta)
    raw = 1.0 / np.maximum(d, eps_distance) ** 2
    masked = raw.copy()
    np.fill_diagonal(masked, -np.inf)
    np.fill_diagonal(raw, beta * masked.max(axis=1))
    normalized = raw / raw.sum(axis=1, keepdims=True)
    return WeightMatrix(d, raw, normalized, beta)


def _knfu_pipeline(matrices, beta, eps_distance):
    epds = [compute_epd(m) for m in matrices]
    weights = weight_matrix(pairwise_kl(epds), beta, eps_distance)
    stacked = np.stack([m.values for m in matrices])
    fused = np.einsum("nm,mkc->nkc", weights.normalized, stacked)
    return epds, weights, FusedKnowledge(list(fused))


def knfu_fuse(matrices, beta, eps_distance=EPS_DISTANCE):
    """Personalized fusion: weight peers by EPD similarity and mix rows."""
    _check_aligned(matrices)
    return _knfu_pipeline(matrices, beta, eps_distance)[2]


def fedmd_fuse(matrices):
    """Uniform average of all clients' matrices, identical for everyone."""
    _check_aligned(matrices)
    mean = np.mean([m.values for m in matrices], axis=0)
    return FusedKnowledge([mean.copy() for _ in matrices])


def selective_fd_fuse(matrices, transfer_labels, entropy_threshold):
    """Dual-selector fusion, identical for everyone.

    A row participates for sample i only when its argmax matches the
    ground-truth label; among participants, rows with prediction entropy
    above the threshold (nats) are dropped. Surviving rows are averaged.
    Samples where nothing survives fall back to the uniform mean of all
    rows and are flagged.
    """
    _check_aligned(matrices)
    labels = np.asarray(transfer_labels)
    stacked = np.stack([m.values for m in matrices])  # (N, K, C)
    if stacked.shape[1] != len(labels):
        raise InputError("transfer labels do not align with soft-label rows")

    correct = stacked.argmax(axis=2) == labels[None, :]
    entropy = -(stacked * np.log(np.clip(stacked, EPS_LOG, None))).sum(axis=2)
    keep = correct & (entropy <= entropy_threshold)

    survivors = keep.sum(axis=0)  # per sample
    fallback = survivors == 0
    weights = keep.astype(np.float64)
    weights[:, fallback] = 1.0
    weights /= weights.sum(axis=0, keepdims=True)
    fused = np.einsum("nk,nkc->kc", weights, stacked)
    return FusedKnowledge([fused.copy() for _ in matrices], fallback_rows=fallback)


def _check_aligned(matrices):
    if not matrices:
        raise InputError("no soft-label matrices to fuse")
    shape = matrices[0].values.shape
    for m in matrices[1:]:
        if m.values.shape != shape:
            raise InputError(
                f"soft-label shapes disagree: {shape} vs {m.values.shape}"
            )


class KnfuStrategy:
    """Personalized EPD-similarity fusion; counts weight-matrix evaluations
    and retains the last round's internals for inspection dumps."""

    name = "knfu"

    def __init__(self, beta, eps_distance=EPS_DISTANCE):
        self.beta = beta
        self.eps_distance = eps_distance
        self.weight_matrix_evals = 0
        self.last_epds = None
        self.last_weights = None

    def fuse(self, matrices, transfer_labels):
        _check_aligned(matrices)
        self.weight_matrix_evals += 1
        epds, weights, fused = _knfu_pipeline(matrices, self.beta, self.eps_distance)
        self.last_epds = epds
        self.last_weights = weights
        return fused


class FedMdStrategy:
    name = "fedmd"
    weight_matrix_evals = 0

    def fuse(self, matrices, transfer_labels):
        return fedmd_fuse(matrices)


class SelectiveFdStrategy:
    name = "selective_fd"
    weight_matrix_evals = 0

    def __init__(self, entropy_threshold):
        self.entropy_threshold = entropy_threshold

    def fuse(self, matrices, transfer_labels):
        return selective_fd_fuse(matrices, transfer_labels, self.entropy_threshold)


class LocalStrategy:
    """No knowledge exchange; the federation loop skips fusion entirely."""

    name = "local"
    weight_matrix_evals = 0
    fuse = None


def make_strategy(name, *, beta, eps_distance, entropy_threshold):
    if name == "knfu":
        return KnfuStrategy(beta, eps_distance)
    if name == "fedmd":
        return FedMdStrategy()
    if name == "selective_fd":
        return SelectiveFdStrategy(entropy_threshold)
    if name == "local":
        return LocalStrategy()
    raise InputError(f"unknown fusion strategy {name!r}")


def dump_fusion_state(epds, weights, path):
    """Write EPDs and the normalized weight matrix as JSON for inspection."""
    payload = {
        "epds": {str(e.client_id): e.distribution.tolist() for e in epds},
        "distances": weights.distances.tolist(),
        "normalized_weights": weights.normalized.tolist(),
        "beta": weights.beta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
