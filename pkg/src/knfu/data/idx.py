"""IDX binary format (the MNIST distribution files).

Big-endian header: u32 magic, then one u32 per dimension. Magic 0x00000803
is a 3-D u8 image file, 0x00000801 a 1-D u8 label file. Files may be
gzip-compressed; that is detected from the two leading bytes.
"""

import gzip
import os
import struct

import numpy as np

from ..errors import ParseError
from .sets import LabeledSet

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


def parse_idx(data):
    """Decode one IDX payload to an array.

    Images come back as float64 in [0, 1] with shape (count, rows, cols);
    labels as int64 with shape (count,).
    """
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    if len(data) < 4:
        raise ParseError("IDX payload shorter than its magic", offset=len(data))
    (magic,) = struct.unpack_from(">I", data, 0)
    if magic == IMAGE_MAGIC:
        ndim = 3
    elif magic == LABEL_MAGIC:
        ndim = 1
    else:
        raise ParseError(f"bad IDX magic 0x{magic:08x}", offset=0)
    header_size = 4 + 4 * ndim
    if len(data) < header_size:
        raise ParseError("truncated IDX dimension header", offset=len(data))
    dims = struct.unpack_from(f">{ndim}I", data, 4)
    expected = header_size + int(np.prod(dims))
    if len(data) < expected:
        raise ParseError(
            f"IDX payload ends early: need {expected} bytes", offset=len(data)
        )
    raw = np.frombuffer(data, dtype=np.uint8, count=int(np.prod(dims)),
                        offset=header_size).reshape(dims)
    if magic == LABEL_MAGIC:
        return raw.astype(np.int64)
    return raw.astype(np.float64) / 255.0


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def _find(directory, stem):
    for name in (stem, stem + ".gz"):
        path = os.path.join(directory, name)
        if os.path.exists(path):
            return path
    raise FileNotFoundError(f"{stem}[.gz] not found under {directory}")


def load_mnist(directory):
    """Load the four standard files from a directory; returns (train, test).

    Images gain a trailing channel axis so they feed the conv stack directly.
    """
    sets = []
    for split in ("train", "t10k"):
        images = parse_idx(_read(_find(directory, f"{split}-images-idx3-ubyte")))
        labels = parse_idx(_read(_find(directory, f"{split}-labels-idx1-ubyte")))
        sets.append(LabeledSet(images[..., None], labels, num_classes=10))
    return tuple(sets)
