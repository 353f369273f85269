"""Synthetic Gaussian-blob classification data for fast experiments."""

import numpy as np

from ..errors import InputError
from .sets import LabeledSet

SEPARATION = 3.0  # minimum distance between class means, in units of sigma


def synth_dataset(num_classes, samples_per_class, input_dim, seed):
    """Unit-variance Gaussian blobs, one per class, balanced labels.

    Class means are drawn once per seed and rescaled so the closest pair
    sits exactly SEPARATION apart, which keeps the classes linearly
    separable but leaves boundary overlap. Fully deterministic per seed.
    """
    if num_classes < 2:
        raise InputError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(num_classes, input_dim))
    diffs = means[:, None, :] - means[None, :, :]
    dists = np.sqrt((diffs**2).sum(axis=-1))
    min_dist = dists[~np.eye(num_classes, dtype=bool)].min()
    if min_dist == 0.0:
        raise InputError("degenerate class means; use a different seed")
    means *= SEPARATION / min_dist

    labels = np.repeat(np.arange(num_classes), samples_per_class)
    inputs = means[labels] + rng.normal(size=(len(labels), input_dim))
    order = rng.permutation(len(labels))
    return LabeledSet(inputs[order], labels[order], num_classes)
