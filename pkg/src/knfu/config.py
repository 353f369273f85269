"""Experiment configuration: YAML parsing, validation, fingerprinting.

Every key is optional; omitted fields fall back to the reference setup
(20 clients, one local epoch, beta 10, batch size bound to the shard size).
Unknown keys are rejected rather than ignored.
"""

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, fields, replace

import yaml

from .errors import ConfigError

STRATEGY_IDS = ("knfu", "fedmd", "selective_fd", "local")
STRATEGY_ALIASES = {
    "knfu": "knfu",
    "fedmd": "fedmd",
    "selectivefd": "selective_fd",
    "selective-fd": "selective_fd",
    "selective_fd": "selective_fd",
    "local": "local",
}
DATASETS = ("synthetic", "mnist", "cifar10")
MODEL_IDS = ("M1", "M2", "MLP-small")
LOCAL_MODES = ("transfer", "local")
ENV_DATA_DIR = "KNFU_DATA_DIR"

# YAML key -> attribute name, for keys that are not valid identifiers
KEY_ALIASES = {"lambda": "lam"}


@dataclass
class ExperimentConfig:
    dataset: str = "synthetic"
    num_clients: int = 20
    alpha: float = 0.5
    shard_size: int = 100
    transfer_size: int = None  # None -> shard_size
    num_classes: int = 10
    local_epochs: int = 1
    finetune_epochs: int = 1
    rounds: int = 50
    lam: float = 1.0
    beta: float = 10.0
    eps_distance: float = 1e-6
    entropy_threshold: float = None  # None -> ln(C) / 2
    learning_rate: float = 0.01
    batch_size: int = None  # None -> schedule keyed on shard size
    model_spec: str = None  # None -> dataset default
    strategies: tuple = STRATEGY_IDS
    seeds: tuple = (0, 1, 2)
    data_dir: str = None
    out_dir: str = "results"
    local_mode: str = "transfer"
    test_size: int = 200
    synth_dim: int = 2
    synth_train_per_class: int = None  # None -> sized from demand
    synth_test_per_class: int = None
    mlp_hidden: tuple = (32,)
    dump_fusion: bool = False

    def resolved_transfer_size(self):
        return self.shard_size if self.transfer_size is None else self.transfer_size

    def resolved_entropy_threshold(self):
        if self.entropy_threshold is None:
            return math.log(self.num_classes) / 2.0
        return self.entropy_threshold

    def resolved_model_spec(self):
        if self.model_spec is not None:
            return self.model_spec
        return {"mnist": "M1", "cifar10": "M2", "synthetic": "MLP-small"}[self.dataset]

    def resolved_data_dir(self):
        if self.data_dir is not None:
            return self.data_dir
        return os.environ.get(ENV_DATA_DIR)

    def fingerprint(self):
        """Stable hash of the experiment identity.

        Seeds, output location and data location are excluded so runs of
        the same experiment grid share a fingerprint across seeds.
        """
        payload = {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if f.name not in ("seeds", "out_dir", "data_dir")
        }
        payload["transfer_size"] = self.resolved_transfer_size()
        payload["entropy_threshold"] = self.resolved_entropy_threshold()
        payload["model_spec"] = self.resolved_model_spec()
        canon = json.dumps(payload, sort_keys=True, default=list)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _positive(value, name, kind=float, strict=True):
    try:
        value = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a {kind.__name__}, got {value!r}")
    if strict and value <= 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    if not strict and value < 0:
        raise ConfigError(f"{name} must be nonnegative, got {value}")
    return value


def _normalize_strategies(raw):
    if isinstance(raw, str):
        raw = [s for s in raw.replace(",", " ").split() if s]
    out = []
    for item in raw:
        key = str(item).lower()
        if key not in STRATEGY_ALIASES:
            raise ConfigError(f"strategies: unknown strategy {item!r}")
        name = STRATEGY_ALIASES[key]
        if name not in out:
            out.append(name)
    if not out:
        raise ConfigError("strategies: at least one strategy required")
    return tuple(out)


def config_from_dict(raw):
    """Build and validate a config from a plain mapping."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for key, value in raw.items():
        attr = KEY_ALIASES.get(key, key)
        if attr not in known:
            raise ConfigError(f"unknown config key {key!r}")
        values[attr] = value
    cfg = ExperimentConfig(**values)
    return validate_config(cfg)


def validate_config(cfg):
    if cfg.dataset not in DATASETS:
        raise ConfigError(f"dataset must be one of {DATASETS}, got {cfg.dataset!r}")
    cfg = replace(
        cfg,
        alpha=_positive(cfg.alpha, "alpha"),
        beta=_positive(cfg.beta, "beta"),
        lam=_positive(cfg.lam, "lambda", strict=False),
        eps_distance=_positive(cfg.eps_distance, "eps_distance"),
        learning_rate=_positive(cfg.learning_rate, "learning_rate"),
        num_clients=_positive(cfg.num_clients, "num_clients", int),
        shard_size=_positive(cfg.shard_size, "shard_size", int),
        num_classes=_positive(cfg.num_classes, "num_classes", int),
        local_epochs=_positive(cfg.local_epochs, "local_epochs", int),
        finetune_epochs=_positive(cfg.finetune_epochs, "finetune_epochs", int,
                                  strict=False),
        rounds=_positive(cfg.rounds, "rounds", int, strict=False),
        test_size=_positive(cfg.test_size, "test_size", int),
        synth_dim=_positive(cfg.synth_dim, "synth_dim", int),
        strategies=_normalize_strategies(cfg.strategies),
    )
    if cfg.num_classes < 2:
        raise ConfigError("num_classes must be at least 2")
    if cfg.transfer_size is not None:
        cfg = replace(cfg, transfer_size=_positive(cfg.transfer_size,
                                                   "transfer_size", int))
    if cfg.entropy_threshold is not None:
        cfg = replace(cfg, entropy_threshold=_positive(cfg.entropy_threshold,
                                                       "entropy_threshold"))
    if cfg.batch_size is not None:
        cfg = replace(cfg, batch_size=_positive(cfg.batch_size, "batch_size", int))
    if cfg.model_spec is not None and cfg.model_spec not in MODEL_IDS:
        raise ConfigError(f"model_spec must be one of {MODEL_IDS}, "
                          f"got {cfg.model_spec!r}")
    if cfg.local_mode not in LOCAL_MODES:
        raise ConfigError(f"local_mode must be one of {LOCAL_MODES}, "
                          f"got {cfg.local_mode!r}")
    try:
        cfg = replace(cfg, seeds=tuple(int(s) for s in cfg.seeds))
    except (TypeError, ValueError):
        raise ConfigError(f"seeds must be a list of integers, got {cfg.seeds!r}")
    if not cfg.seeds:
        raise ConfigError("seeds: at least one seed required")
    try:
        cfg = replace(cfg, mlp_hidden=tuple(int(h) for h in cfg.mlp_hidden))
    except (TypeError, ValueError):
        raise ConfigError(f"mlp_hidden must be a list of integers, "
                          f"got {cfg.mlp_hidden!r}")
    for extra in ("synth_train_per_class", "synth_test_per_class"):
        value = getattr(cfg, extra)
        if value is not None:
            cfg = replace(cfg, **{extra: _positive(value, extra, int)})
    if cfg.dataset != "synthetic" and cfg.resolved_data_dir() is None:
        raise ConfigError(
            f"data_dir: dataset {cfg.dataset!r} needs a data directory "
            f"(config key data_dir or ${ENV_DATA_DIR})"
        )
    return cfg


def parse_config(path):
    """Load a YAML config file; an empty file yields the full defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return config_from_dict(raw)
