"""Round orchestration: local training, extraction, fusion, fine-tuning.

All clients share one architecture per experiment. Each round every client
first trains on its own shard with plain cross-entropy; fusion strategies
then predict on the transfer set, receive fused knowledge back and
fine-tune on the transfer set with the composite loss. The local baseline
skips the exchange entirely and, by default, fine-tunes on the transfer
set's ground-truth labels so all strategies consume the same sample budget.

Determinism contract: every client draws its batch orders from a private
generator seeded by (experiment seed, client id, round), so results do not
depend on client execution order or worker count.
"""

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .data import build_federation, load_cifar10, load_mnist, synth_dataset
from .errors import ConfigError, InputError
from .fusion import SoftLabelMatrix, dump_fusion_state, make_strategy
from .metrics import client_accuracy
from .nn import SgdState, backward_step, build_model, forward
from .nn.model import m1_spec, m2_spec, mlp_spec

# batch size bound to the local shard size; other sizes snap to the
# nearest listed size (ties toward the smaller one)
BATCH_SCHEDULE = {1000: 128, 500: 64, 200: 32, 100: 16, 50: 8}

# stream tags keeping the per-purpose RNGs disjoint under one seed
_STREAM_SYNTH_TRAIN = 10
_STREAM_SYNTH_TEST = 11
_STREAM_FEDERATION = 20
_STREAM_INIT = 1
_STREAM_ROUND = 2


def batch_size_for(shard_size):
    key = min(BATCH_SCHEDULE, key=lambda k: (abs(k - shard_size), k))
    return BATCH_SCHEDULE[key]


@dataclass
class ClientState:
    client_id: int
    model: object
    train_set: object
    test_set: object
    sgd: SgdState
    accuracy_history: list = field(default_factory=list)
    samples_seen: int = 0
    round_rng: object = None


@dataclass
class RoundRecord:
    round_index: int
    strategy: str
    per_client_accuracy: list
    alma: float
    wall_time: float


@dataclass
class RunResult:
    strategy: str
    seed: int
    records: list
    clients: list
    fusion: object  # the strategy instance, exposing instrumentation counters

    @property
    def final_alma(self):
        return self.records[-1].alma if self.records else None


def soft_labels(model, inputs, batch_size=256):
    """Temperature-1 predictions over a whole input set, row-simplex."""
    chunks = [
        forward(model, inputs[start : start + batch_size])
        for start in range(0, len(inputs), batch_size)
    ]
    return np.concatenate(chunks) if chunks else np.zeros((0, model.spec.num_classes))


def _train_epochs(client, dataset, epochs, lam, targets, batch_size):
    if len(dataset) == 0:
        raise ConfigError(f"client {client.client_id} has an empty shard")
    for _ in range(epochs):
        order = client.round_rng.permutation(len(dataset))
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            target = targets[idx] if targets is not None else None
            backward_step(
                client.model,
                dataset.inputs[idx],
                dataset.labels[idx],
                target,
                lam,
                client.sgd,
            )
            client.samples_seen += len(idx)


def local_training_phase(clients, epochs):
    """Per-client CE-only epochs on the client's own shard."""
    for client in clients:
        _train_epochs(client, client.train_set, epochs, 0.0, None,
                      client.sgd.batch_size)


def extraction_phase(clients, transfer_inputs):
    return [
        SoftLabelMatrix(client.client_id, soft_labels(client.model, transfer_inputs))
        for client in clients
    ]


def finetune_phase(clients, fused, transfer_set, lam, epochs, batch_size):
    """Composite CE + lam^2 KL fine-tuning on the transfer set."""
    for position, client in enumerate(clients):
        target = fused.matrices[position]
        if len(target) != len(transfer_set):
            raise InputError("fused rows do not align with the transfer set")
        _train_epochs(client, transfer_set, epochs,
                      lam, target if lam > 0 else None, batch_size)


def model_spec_for(cfg, input_shape):
    name = cfg.resolved_model_spec()
    if name == "M1":
        spec = m1_spec(cfg.num_classes)
    elif name == "M2":
        spec = m2_spec(cfg.num_classes)
    else:
        if len(input_shape) != 1:
            raise ConfigError(
                f"MLP-small needs flat inputs, dataset provides {input_shape}"
            )
        spec = mlp_spec(input_shape[0], cfg.mlp_hidden, cfg.num_classes)
    if spec.input_shape != input_shape:
        raise ConfigError(
            f"model {name} expects input {spec.input_shape}, "
            f"dataset provides {input_shape}"
        )
    return spec


def _synth_sources(cfg, seed):
    demand = 3 * cfg.num_clients * cfg.shard_size + cfg.resolved_transfer_size()
    train_per_class = cfg.synth_train_per_class or -(-demand // cfg.num_classes)
    test_per_class = cfg.synth_test_per_class or 2 * cfg.test_size
    train = synth_dataset(cfg.num_classes, train_per_class, cfg.synth_dim,
                          [seed, _STREAM_SYNTH_TRAIN])
    test = synth_dataset(cfg.num_classes, test_per_class, cfg.synth_dim,
                         [seed, _STREAM_SYNTH_TEST])
    return train, test


def load_federation(cfg, seed):
    """Materialize sources for the configured dataset and split them."""
    if cfg.dataset == "synthetic":
        source, test_source = _synth_sources(cfg, seed)
    else:
        root = cfg.resolved_data_dir()
        sub = os.path.join(root, cfg.dataset)
        directory = sub if os.path.isdir(sub) else root
        loader = load_mnist if cfg.dataset == "mnist" else load_cifar10
        source, test_source = loader(directory)
    return build_federation(
        source,
        test_source,
        cfg.num_clients,
        cfg.alpha,
        cfg.shard_size,
        seed=[seed, _STREAM_FEDERATION],
        transfer_size=cfg.resolved_transfer_size(),
        test_size=cfg.test_size,
    )


def init_clients(cfg, spec, data, seed):
    batch = cfg.batch_size or batch_size_for(cfg.shard_size)
    clients = []
    for n in range(cfg.num_clients):
        clients.append(
            ClientState(
                client_id=n,
                model=build_model(spec, [seed, _STREAM_INIT, n]),
                train_set=data.train_shards[n],
                test_set=data.test_shards[n],
                sgd=SgdState(cfg.learning_rate, batch),
            )
        )
    return clients


def run_single(cfg, strategy_id, seed, data, spec, progress=None, dump_dir=None):
    """Execute one strategy for one seed over cfg.rounds rounds."""
    clients = init_clients(cfg, spec, data, seed)
    strategy = make_strategy(
        strategy_id,
        beta=cfg.beta,
        eps_distance=cfg.eps_distance,
        entropy_threshold=cfg.resolved_entropy_threshold(),
    )
    transfer = data.transfer_set
    finetune_batch = cfg.batch_size or batch_size_for(len(transfer))
    records = []
    for r in range(cfg.rounds):
        start = time.perf_counter()
        for client in clients:
            client.round_rng = np.random.default_rng(
                [seed, _STREAM_ROUND, client.client_id, r]
            )
        local_training_phase(clients, cfg.local_epochs)
        if strategy.fuse is not None:
            matrices = extraction_phase(clients, transfer.inputs)
            fused = strategy.fuse(matrices, transfer.labels)
            finetune_phase(clients, fused, transfer, cfg.lam,
                           cfg.finetune_epochs, finetune_batch)
            if dump_dir is not None and strategy.name == "knfu":
                dump_fusion_state(
                    strategy.last_epds,
                    strategy.last_weights,
                    os.path.join(dump_dir, f"fusion_{strategy_id}_s{seed}_r{r}.json"),
                )
        elif cfg.local_mode == "transfer":
            for client in clients:
                _train_epochs(client, transfer, cfg.finetune_epochs, 0.0, None,
                              finetune_batch)
        else:
            for client in clients:
                _train_epochs(client, client.train_set, cfg.finetune_epochs,
                              0.0, None, client.sgd.batch_size)
        accuracies = [client_accuracy(c.model, c.test_set) for c in clients]
        for client, acc in zip(clients, accuracies):
            client.accuracy_history.append(acc)
        record = RoundRecord(
            round_index=r,
            strategy=strategy_id,
            per_client_accuracy=accuracies,
            alma=float(np.mean(accuracies)),
            wall_time=time.perf_counter() - start,
        )
        records.append(record)
        if progress is not None:
            progress(record, seed)
    return RunResult(strategy_id, seed, records, clients, strategy)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: dict  # (strategy, seed) -> RunResult


def run_experiment(cfg, progress=None, dump_dir=None):
    """All seeds x strategies; each seed shares data and initial models."""
    runs = {}
    for seed in cfg.seeds:
        data = load_federation(cfg, seed)
        spec = model_spec_for(cfg, data.transfer_set.inputs.shape[1:])
        for strategy_id in cfg.strategies:
            runs[(strategy_id, seed)] = run_single(
                cfg, strategy_id, seed, data, spec, progress, dump_dir
            )
    return ExperimentResult(cfg, runs)
