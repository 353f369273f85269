"""Dirichlet non-IID partitioning and federation assembly.

Each client draws a class-proportion row from Dir(alpha * 1_C); smaller
alpha concentrates mass on fewer classes. Proportions are rounded to exact
shard sizes by largest remainder, then samples are dealt from per-class
pools without replacement, so shards are disjoint by construction.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import PartitionError
from .sets import LabeledSet

MAX_RESAMPLES = 100
DEFAULT_TEST_SIZE = 200


@dataclass
class PartitionPlan:
    alpha: float
    num_clients: int
    shard_size: int
    proportions: np.ndarray = field(repr=False)  # (N, C), rows sum to 1
    seed: object = None


@dataclass
class FederatedData:
    """Per-client train/test shards plus the shared labeled transfer set."""

    train_shards: list
    test_shards: list
    transfer_set: LabeledSet
    plan: PartitionPlan


def largest_remainder(proportions, total):
    """Integer counts summing exactly to `total`, proportional rounding.

    Leftover units go to the largest fractional remainders; ties break
    toward the lower index for determinism.
    """
    proportions = np.asarray(proportions, dtype=np.float64)
    exact = proportions * total
    counts = np.floor(exact).astype(np.int64)
    deficit = int(total - counts.sum())
    if deficit:
        order = np.lexsort((np.arange(len(counts)), -(exact - counts)))
        counts[order[:deficit]] += 1
    return counts


def _class_positions(dataset):
    return [np.flatnonzero(dataset.labels == c) for c in range(dataset.num_classes)]


def dirichlet_partition(source, num_clients, alpha, shard_size, seed,
                        max_resamples=MAX_RESAMPLES):
    """Split `source` into `num_clients` disjoint shards of `shard_size`.

    Proportion draws that demand more of a class than the pool holds are
    resampled wholesale, up to `max_resamples` attempts.
    """
    if alpha <= 0:
        raise PartitionError("alpha must be positive")
    rng = np.random.default_rng(seed)
    num_classes = source.num_classes
    pools = _class_positions(source)
    available = np.array([len(p) for p in pools])

    for _ in range(max_resamples):
        proportions = rng.dirichlet(np.full(num_classes, alpha), size=num_clients)
        counts = np.stack([largest_remainder(row, shard_size) for row in proportions])
        if (counts.sum(axis=0) <= available).all():
            break
    else:
        raise PartitionError(
            f"no feasible class allocation after {max_resamples} proportion "
            f"draws (N={num_clients}, K={shard_size}, pool={available.tolist()})"
        )

    shard_positions = [[] for _ in range(num_clients)]
    for c in range(num_classes):
        dealt = rng.permutation(pools[c])
        cursor = 0
        for n in range(num_clients):
            take = counts[n, c]
            shard_positions[n].append(dealt[cursor : cursor + take])
            cursor += take
    shards = [source.subset(np.concatenate(parts)) for parts in shard_positions]
    plan = PartitionPlan(alpha, num_clients, shard_size, proportions, seed)
    return plan, shards


def _draw_by_class(dataset, pools, per_class, rng, pool_name):
    chosen = []
    for c, need in enumerate(per_class):
        if need > len(pools[c]):
            raise PartitionError(
                f"{pool_name} exhausted: class {c} has {len(pools[c])} "
                f"samples, {need} requested"
            )
        if need:
            chosen.append(rng.permutation(pools[c])[:need])
    return np.concatenate(chosen) if chosen else np.empty(0, dtype=np.int64)


def build_federation(source, test_source, num_clients, alpha, shard_size, seed,
                     transfer_size=None, test_size=DEFAULT_TEST_SIZE):
    """Assemble train shards, a transfer set and per-client test shards.

    The transfer set is drawn class-balanced from `source` first and the
    remainder becomes the training pool, so the two never overlap. Test
    shards follow each client's own train proportions; they come from
    `test_source` and may overlap across clients.
    """
    if transfer_size is None:
        transfer_size = shard_size
    root = np.random.SeedSequence(seed)
    transfer_seq, partition_seq, test_seq = root.spawn(3)

    transfer_rng = np.random.default_rng(transfer_seq)
    num_classes = source.num_classes
    transfer_per_class = largest_remainder(
        np.full(num_classes, 1.0 / num_classes), transfer_size
    )
    source_pools = _class_positions(source)
    transfer_positions = _draw_by_class(
        source, source_pools, transfer_per_class, transfer_rng, "transfer pool"
    )
    transfer_set = source.subset(transfer_positions)

    mask = np.ones(len(source), dtype=bool)
    mask[transfer_positions] = False
    train_pool = source.subset(np.flatnonzero(mask))
    plan, train_shards = dirichlet_partition(
        train_pool, num_clients, alpha, shard_size, partition_seq
    )

    test_rng = np.random.default_rng(test_seq)
    test_pools = _class_positions(test_source)
    test_shards = []
    for n in range(num_clients):
        per_class = largest_remainder(plan.proportions[n], test_size)
        positions = _draw_by_class(
            test_source, test_pools, per_class, test_rng, f"test pool (client {n})"
        )
        test_shards.append(test_source.subset(positions))

    return FederatedData(train_shards, test_shards, transfer_set, plan)


def write_partition_manifest(fed, path):
    """Dump shard membership (source sample ids) for reproducibility audits."""
    manifest = {
        "alpha": fed.plan.alpha,
        "num_clients": fed.plan.num_clients,
        "shard_size": fed.plan.shard_size,
        "transfer_indices": fed.transfer_set.indices.tolist(),
        "clients": {
            str(n): {
                "train_indices": fed.train_shards[n].indices.tolist(),
                "test_indices": fed.test_shards[n].indices.tolist(),
            }
            for n in range(fed.plan.num_clients)
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
