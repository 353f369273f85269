"""Labeled sample collections."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError


@dataclass
class LabeledSet:
    """Inputs with integer class labels.

    `indices` optionally records each sample's position in the originating
    pool so shard disjointness can be audited after subsetting.
    """

    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    indices: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.inputs) != len(self.labels):
            raise InputError(
                f"{len(self.inputs)} inputs vs {len(self.labels)} labels"
            )
        if len(self.labels) and (self.labels.min() < 0
                                 or self.labels.max() >= self.num_classes):
            raise InputError(f"labels outside [0, {self.num_classes})")
        if self.indices is None:
            self.indices = np.arange(len(self.labels))
        else:
            self.indices = np.asarray(self.indices, dtype=np.int64)

    def __len__(self):
        return len(self.labels)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledSet(
            self.inputs[idx], self.labels[idx], self.num_classes,
            indices=self.indices[idx],
        )

    def class_histogram(self):
        return np.bincount(self.labels, minlength=self.num_classes)
