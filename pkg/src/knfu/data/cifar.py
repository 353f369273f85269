"""CIFAR-10 binary batch files.

Each record is 3073 bytes: one label byte then 3072 channel-major pixels
(1024 red, 1024 green, 1024 blue, row-major within each plane).
"""

import os

import numpy as np

from ..errors import ParseError
from .sets import LabeledSet

RECORD_BYTES = 3073


def parse_cifar10(data):
    """Decode one binary batch into 32x32x3 float tensors in [0, 1]."""
    if len(data) % RECORD_BYTES:
        raise ParseError(
            f"payload length {len(data)} is not a multiple of {RECORD_BYTES}",
            offset=len(data) - len(data) % RECORD_BYTES,
        )
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if len(labels) and labels.max() >= 10:
        raise ParseError(f"label byte {labels.max()} out of range")
    pixels = records[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    return LabeledSet(pixels.astype(np.float64) / 255.0, labels, num_classes=10)


def load_cifar10(directory):
    """Read data_batch_1..5 and test_batch; returns (train, test)."""
    train_parts = []
    for i in range(1, 6):
        with open(os.path.join(directory, f"data_batch_{i}.bin"), "rb") as fh:
            train_parts.append(parse_cifar10(fh.read()))
    train = LabeledSet(
        np.concatenate([p.inputs for p in train_parts]),
        np.concatenate([p.labels for p in train_parts]),
        num_classes=10,
    )
    with open(os.path.join(directory, "test_batch.bin"), "rb") as fh:
        test = parse_cifar10(fh.read())
    return train, test
