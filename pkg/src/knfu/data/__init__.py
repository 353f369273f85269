from .sets import LabeledSet
from .idx import parse_idx, load_mnist
from .cifar import parse_cifar10, load_cifar10
from .synth import synth_dataset
from .partition import (
    FederatedData,
    PartitionPlan,
    build_federation,
    dirichlet_partition,
    largest_remainder,
    write_partition_manifest,
)

__all__ = [
    "LabeledSet",
    "parse_idx",
    "load_mnist",
    "parse_cifar10",
    "load_cifar10",
    "synth_dataset",
    "FederatedData",
    "PartitionPlan",
    "build_federation",
    "dirichlet_partition",
    "largest_remainder",
    "write_partition_manifest",
]
