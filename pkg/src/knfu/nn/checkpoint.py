"""Binary parameter checkpoints.

Layout: magic b"KNFU" | u16 LE spec-id length | spec-id UTF-8 |
little-endian float32 parameter vector to end of file. Values are stored
in float32, so a round trip is exact only to single precision.
"""

import struct

import numpy as np

from ..errors import ParseError
from .model import Model

MAGIC = b"KNFU"


def save_checkpoint(model, path):
    arch = model.spec.arch_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", len(arch)))
        fh.write(arch)
        fh.write(model.params.astype("<f4").tobytes())


def load_checkpoint(path, spec):
    """Read a checkpoint written for `spec`; validates magic, id and size."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ParseError(f"bad checkpoint magic {data[:4]!r}", offset=0)
    if len(data) < 6:
        raise ParseError("truncated checkpoint header", offset=len(data))
    (name_len,) = struct.unpack_from("<H", data, 4)
    arch = data[6 : 6 + name_len].decode("utf-8")
    if arch != spec.arch_id:
        raise ParseError(f"checkpoint is for spec {arch!r}, expected {spec.arch_id!r}")
    payload = data[6 + name_len :]
    if len(payload) % 4:
        raise ParseError("parameter payload is not a whole number of float32s",
                         offset=len(data))
    params = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    if params.size != spec.param_count():
        raise ParseError(
            f"checkpoint holds {params.size} parameters, spec needs "
            f"{spec.param_count()}"
        )
    return Model(spec, params)
