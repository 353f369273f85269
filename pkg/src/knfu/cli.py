"""Command-line entry point.

Three subcommands: `run` executes one experiment config across its seeds
and strategies, `sweep` crosses a grid of heterogeneity levels and local
data sizes, and `report` renders the result table and learning-curve
figures from a results directory. Flags override config-file values.
Progress goes to stderr, one line per round, keeping stdout clean.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from .config import config_from_dict, parse_config, validate_config
from .errors import KnfuError
from .federation import load_federation, model_spec_for, run_single
from .metrics import RunOutcome, aggregate_seeds, write_results
from .report import write_report

DEFAULT_SWEEP_ALPHAS = (0.1, 0.25, 0.5, 1.0)
DEFAULT_SWEEP_SIZES = (50, 100, 200)


def _parse_list(text, kind):
    try:
        return tuple(kind(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise KnfuError(f"cannot parse list {text!r}")


def _load_config(args):
    cfg = parse_config(args.config) if args.config else config_from_dict({})
    overrides = {}
    if args.seed:
        overrides["seeds"] = _parse_list(args.seed, int)
    if args.strategy:
        overrides["strategies"] = args.strategy
    if args.out:
        overrides["out_dir"] = args.out
    if overrides:
        cfg = validate_config(replace(cfg, **overrides))
    return cfg


def _progress(cfg, strategy):
    total = cfg.rounds

    def emit(record, seed):
        print(
            f"[{cfg.dataset} a={cfg.alpha:g} k={cfg.shard_size}] "
            f"{strategy} seed={seed} round {record.round_index + 1}/{total} "
            f"alma={record.alma:.4f} ({record.wall_time:.2f}s)",
            file=sys.stderr,
        )

    return emit


def _execute_config(cfg, threads):
    """Run all (strategy, seed) pairs of one config and persist results."""
    dump_dir = None
    if cfg.dump_fusion:
        dump_dir = os.path.join(cfg.out_dir, "fusion")
        os.makedirs(dump_dir, exist_ok=True)

    def run_seed(seed):
        data = load_federation(cfg, seed)
        spec = model_spec_for(cfg, data.transfer_set.inputs.shape[1:])
        out = {}
        for strategy in cfg.strategies:
            out[(strategy, seed)] = run_single(
                cfg, strategy, seed, data, spec,
                progress=_progress(cfg, strategy), dump_dir=dump_dir,
            )
        return out

    runs = {}
    if threads > 1 and len(cfg.seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for chunk in pool.map(run_seed, cfg.seeds):
                runs.update(chunk)
    else:
        for seed in cfg.seeds:
            runs.update(run_seed(seed))

    fingerprint = cfg.fingerprint()
    outcomes = [
        RunOutcome(strategy, seed,
                   result.final_alma if result.final_alma is not None
                   else float("nan"),
                   fingerprint)
        for (strategy, seed), result in runs.items()
    ]
    aggregate = aggregate_seeds(outcomes)
    records = {key: result.records for key, result in runs.items()}
    paths = write_results(records, aggregate, cfg)
    return runs, paths


def cmd_run(args):
    cfg = _load_config(args)
    _, paths = _execute_config(cfg, args.threads)
    for path in paths:
        print(path)
    return 0


def cmd_sweep(args):
    cfg = _load_config(args)
    alphas = _parse_list(args.alpha, float) if args.alpha else DEFAULT_SWEEP_ALPHAS
    sizes = _parse_list(args.size, int) if args.size else DEFAULT_SWEEP_SIZES
    cells = [
        validate_config(replace(cfg, alpha=alpha, shard_size=size))
        for alpha in alphas
        for size in sizes
    ]

    def run_cell(cell):
        # within a cell everything is sequential; cells are the parallel unit
        return _execute_config(cell, threads=1)[1]

    written = []
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            for paths in pool.map(run_cell, cells):
                written.extend(paths)
    else:
        for cell in cells:
            written.extend(run_cell(cell))
    for path in written:
        print(path)
    return 0


def cmd_report(args):
    out_dir = args.out or "results"
    table, written = write_report(out_dir, figures=not args.no_figures)
    print(table)
    for path in written:
        print(path, file=sys.stderr)
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="knfu",
        description="Federated knowledge-distillation experiments with "
                    "personalized soft-label fusion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--seed", help="comma-separated seed list override")
        p.add_argument("--strategy", help="comma-separated strategy override")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--threads", type=int, default=1,
                       help="parallel workers (default 1)")

    p_run = sub.add_parser("run", help="run one experiment config")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="cross a grid of alpha x data size")
    add_common(p_sweep)
    p_sweep.add_argument("--alpha", help="comma-separated heterogeneity levels")
    p_sweep.add_argument("--size", help="comma-separated local data sizes")
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="render table and figures")
    p_report.add_argument("--out", help="results directory (default ./results)")
    p_report.add_argument("--no-figures", action="store_true",
                          help="skip learning-curve PNGs")
    p_report.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (KnfuError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
