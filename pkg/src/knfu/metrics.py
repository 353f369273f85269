"""Accuracy metrics, cross-seed aggregation and results persistence.

Curve files are CSV with header `round,client_id,accuracy,alma,strategy,seed`
and floats printed with 17 significant digits, so re-parsing reproduces the
in-memory doubles bit-exactly. The summary file is JSON keyed by strategy.
"""

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .nn.model import forward

CURVE_HEADER = ("round", "client_id", "accuracy", "alma", "strategy", "seed")


def client_accuracy(model, test_set, batch_size=256):
    """Fraction of argmax-correct predictions; ties break to the lowest index."""
    if len(test_set) == 0:
        raise InputError("empty test shard")
    correct = 0
    for start in range(0, len(test_set), batch_size):
        probs = forward(model, test_set.inputs[start : start + batch_size])
        correct += int((probs.argmax(axis=1)
                        == test_set.labels[start : start + batch_size]).sum())
    return correct / len(test_set)


def alma(clients):
    """Average local model accuracy: mean over clients of own-test accuracy."""
    return float(np.mean([client_accuracy(c.model, c.test_set) for c in clients]))


@dataclass
class RunOutcome:
    """Final result of one (strategy, seed) run, as fed to aggregation."""

    strategy: str
    seed: int
    final_alma: float
    fingerprint: str


@dataclass
class StrategyAggregate:
    values: list
    mean: float
    std: float  # sample (n-1) standard deviation; 0 for a single seed
    single_seed: bool


@dataclass
class SeedAggregate:
    fingerprint: str
    per_strategy: dict


def aggregate_seeds(outcomes):
    """Group run outcomes by strategy and compute mean and sample std.

    All outcomes must share one config fingerprint; a strategy observed
    under a single seed reports std 0 with the single-seed flag set.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise InputError("no run outcomes to aggregate")
    prints = {o.fingerprint for o in outcomes}
    if len(prints) != 1:
        raise InputError(f"mixed config fingerprints: {sorted(prints)}")
    per_strategy = {}
    for o in outcomes:
        per_strategy.setdefault(o.strategy, []).append(o)
    aggregates = {}
    for strategy, group in per_strategy.items():
        group.sort(key=lambda o: o.seed)
        values = [o.final_alma for o in group]
        single = len(values) == 1
        std = 0.0 if single else float(np.std(values, ddof=1))
        aggregates[strategy] = StrategyAggregate(
            values=values, mean=float(np.mean(values)), std=std, single_seed=single
        )
    return SeedAggregate(prints.pop(), aggregates)


def _fmt(x):
    return format(float(x), ".17g")


def curve_filename(cfg, strategy, seed):
    return f"curve_{cfg.dataset}_a{cfg.alpha:g}_k{cfg.shard_size}_{strategy}_s{seed}.csv"


def summary_filename(cfg):
    return f"summary_{cfg.dataset}_a{cfg.alpha:g}_k{cfg.shard_size}.json"


def write_results(records_by_run, aggregate, cfg, out_dir=None):
    """Persist one curve file per (strategy, seed) plus the summary.

    `records_by_run` maps (strategy, seed) to that run's round records.
    Returns the list of paths written.
    """
    out_dir = cfg.out_dir if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for (strategy, seed), records in sorted(records_by_run.items()):
        path = os.path.join(out_dir, curve_filename(cfg, strategy, seed))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CURVE_HEADER)
            for rec in records:
                for cid, acc in enumerate(rec.per_client_accuracy):
                    writer.writerow([rec.round_index, cid, _fmt(acc),
                                     _fmt(rec.alma), strategy, seed])
        written.append(path)

    summary = {
        "dataset": cfg.dataset,
        "alpha": cfg.alpha,
        "shard_size": cfg.shard_size,
        "transfer_size": cfg.resolved_transfer_size(),
        "rounds": cfg.rounds,
        "fingerprint": aggregate.fingerprint,
        "strategies": {
            name: {
                "mean": agg.mean,
                "std": agg.std,
                "values": agg.values,
                "seeds": sorted(
                    seed for (s, seed) in records_by_run if s == name
                ),
                "single_seed": agg.single_seed,
            }
            for name, agg in sorted(aggregate.per_strategy.items())
        },
    }
    summary_path = os.path.join(out_dir, summary_filename(cfg))
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    written.append(summary_path)
    return written


def read_curve_file(path):
    """Parse a curve CSV back into float-typed row dicts."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append({
                "round": int(row["round"]),
                "client_id": int(row["client_id"]),
                "accuracy": float(row["accuracy"]),
                "alma": float(row["alma"]),
                "strategy": row["strategy"],
                "seed": int(row["seed"]),
            })
    return rows


def read_summary(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
