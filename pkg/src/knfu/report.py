"""Render result tables and learning-curve figures from persisted files.

The text table mirrors the usual benchmark layout: one row per
heterogeneity level (alpha), one column group per local data size, four
strategy columns inside each group, cells showing mean +/- std ALMA in
percent with the best strategy starred. Figures plot the per-round ALMA
averaged over seeds, one PNG per (dataset, alpha, shard size).
"""

import glob
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import read_curve_file, read_summary

DISPLAY_NAMES = {
    "knfu": "KnFu",
    "fedmd": "FedMD",
    "selective_fd": "Selective-FD",
    "local": "Local",
}
STRATEGY_ORDER = ("knfu", "fedmd", "local", "selective_fd")


def load_summaries(out_dir):
    paths = sorted(glob.glob(os.path.join(out_dir, "summary_*.json")))
    return [read_summary(p) for p in paths]


def _cell(agg):
    return f"{100 * agg['mean']:.1f}±{100 * agg['std']:.1f}"


def render_table(summaries):
    """Fixed-width ALMA (%) table, grouped by dataset."""
    lines = []
    by_dataset = defaultdict(list)
    for s in summaries:
        by_dataset[s["dataset"]].append(s)
    for dataset, group in sorted(by_dataset.items()):
        sizes = sorted({s["shard_size"] for s in group})
        alphas = sorted({s["alpha"] for s in group})
        strategies = [
            s for s in STRATEGY_ORDER
            if any(s in g["strategies"] for g in group)
        ]
        cells = {(s["alpha"], s["shard_size"]): s["strategies"] for s in group}

        width = 13
        lines.append(f"ALMA (%) on {dataset}")
        header1 = " " * 8
        header2 = f"{'alpha':<8}"
        for size in sizes:
            header1 += f"|D_n| = {size}".ljust(width * len(strategies) + 2)
            for strat in strategies:
                header2 += DISPLAY_NAMES[strat].ljust(width)
            header2 += "  "
        lines.append(header1.rstrip())
        lines.append(header2.rstrip())
        lines.append("-" * max(len(header1), len(header2)))
        for alpha in alphas:
            row = f"{alpha:<8g}"
            for size in sizes:
                aggs = cells.get((alpha, size))
                if aggs is None:
                    row += "-".ljust(width * len(strategies) + 2)
                    continue
                best = max(
                    (s for s in strategies if s in aggs),
                    key=lambda s: aggs[s]["mean"],
                    default=None,
                )
                for strat in strategies:
                    if strat in aggs:
                        text = _cell(aggs[strat])
                        if strat == best:
                            text += "*"
                    else:
                        text = "-"
                    row += text.ljust(width)
                row += "  "
            lines.append(row.rstrip())
        lines.append("")
    return "\n".join(lines)


def write_report_csv(summaries, path):
    """Tidy per-(setting, strategy) rows for downstream tooling."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("dataset,alpha,shard_size,strategy,mean,std,n_seeds,fingerprint\n")
        for s in sorted(summaries,
                        key=lambda s: (s["dataset"], s["alpha"], s["shard_size"])):
            for strat in STRATEGY_ORDER:
                if strat not in s["strategies"]:
                    continue
                agg = s["strategies"][strat]
                fh.write(
                    f"{s['dataset']},{s['alpha']:g},{s['shard_size']},{strat},"
                    f"{agg['mean']:.17g},{agg['std']:.17g},"
                    f"{len(agg['values'])},{s['fingerprint']}\n"
                )


def _curve_means(out_dir, summary):
    """Per-strategy (rounds, mean-ALMA-over-seeds) series from curve files."""
    pattern = os.path.join(
        out_dir,
        f"curve_{summary['dataset']}_a{summary['alpha']:g}"
        f"_k{summary['shard_size']}_*_s*.csv",
    )
    per_strategy = defaultdict(list)
    for path in sorted(glob.glob(pattern)):
        rows = read_curve_file(path)
        if not rows:
            continue
        alma_by_round = {}
        for row in rows:
            alma_by_round[row["round"]] = row["alma"]
        series = [alma_by_round[r] for r in sorted(alma_by_round)]
        per_strategy[rows[0]["strategy"]].append(series)
    means = {}
    for strategy, seed_series in per_strategy.items():
        length = min(len(s) for s in seed_series)
        if length == 0:
            continue
        means[strategy] = [
            sum(s[r] for s in seed_series) / len(seed_series) for r in range(length)
        ]
    return means


def render_figures(out_dir, summaries):
    """One learning-curve PNG per (dataset, alpha, shard size)."""
    written = []
    for summary in summaries:
        means = _curve_means(out_dir, summary)
        if not means:
            continue
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for strategy in STRATEGY_ORDER:
            if strategy not in means:
                continue
            series = means[strategy]
            ax.plot(range(1, len(series) + 1), [100 * v for v in series],
                    label=DISPLAY_NAMES[strategy], linewidth=1.4)
        ax.set_xlabel("round")
        ax.set_ylabel("ALMA (%)")
        ax.set_title(
            f"{summary['dataset']}, alpha={summary['alpha']:g}, "
            f"|D_n|={summary['shard_size']}"
        )
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = os.path.join(
            out_dir,
            f"curves_{summary['dataset']}_a{summary['alpha']:g}"
            f"_k{summary['shard_size']}.png",
        )
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def write_report(out_dir, figures=True):
    """Emit report.txt, report.csv and (optionally) curve figures.

    Returns (table text, list of files written).
    """
    summaries = load_summaries(out_dir)
    if not summaries:
        raise FileNotFoundError(f"no summary_*.json files under {out_dir}")
    table = render_table(summaries)
    written = []
    table_path = os.path.join(out_dir, "report.txt")
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(table)
    written.append(table_path)
    csv_path = os.path.join(out_dir, "report.csv")
    write_report_csv(summaries, csv_path)
    written.append(csv_path)
    if figures:
        written.extend(render_figures(out_dir, summaries))
    return table, written
