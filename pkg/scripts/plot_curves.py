#!/usr/bin/env python3
"""Plot average cumulative ratio curves from one or more curve CSVs (needs matplotlib).

    python scripts/plot_curves.py runs/desk/grid_*.csv --out grid.png
"""

import argparse
import csv
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load(path):
    curves = defaultdict(list)
    for row in csv.DictReader(open(path)):
        curves[row["method"]].append(float(row["mean_cumulative_ratio"]))
    return curves


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csvs", nargs="+")
    ap.add_argument("--out", default="curves.png")
    args = ap.parse_args()

    n = len(args.csvs)
    cols = 2 if n > 1 else 1
    rows = math.ceil(n / cols)
    fig, axes = plt.subplots(rows, cols, figsize=(5 * cols, 3.5 * rows), squeeze=False, sharey=True)
    for ax, path in zip(axes.flat, args.csvs):
        for method, values in load(path).items():
            ax.plot(range(1, len(values) + 1), values, label=method)
        ax.set_title(Path(path).stem, fontsize=9)
        ax.set_xscale("log")
        ax.set_xlabel("D-list rank")
        ax.set_ylabel("mean cumulative ratio")
    for ax in list(axes.flat)[n:]:
        ax.axis("off")
    axes.flat[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
