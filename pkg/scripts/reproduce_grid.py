#!/usr/bin/env python3
"""Run the observation-bias grid and print the C(10) value of every method per cell.

    python scripts/reproduce_grid.py --scale desk --seed 0 --out-dir runs/desk

Writes one curve CSV and one per-case JSONL per (p_plus, p_minus) cell.
"""

import argparse
import csv
import sys
from pathlib import Path

from bn2o.cli import main as cli_main


def summarize(out_dir: Path, rank: int = 10) -> None:
    for path in sorted(out_dir.glob("grid_*.csv")):
        values = {r["method"]: float(r["mean_cumulative_ratio"])
                  for r in csv.DictReader(path.open()) if int(r["rank"]) == rank}
        cells = "  ".join(f"{m}={v:.3f}" for m, v in values.items())
        print(f"{path.stem:32s} C({rank}): {cells}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scale", choices=("desk", "paper"), default="desk")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", default="runs/grid")
    ap.add_argument("--mlp", action="store_true")
    ap.add_argument("--no-aisbn", action="store_true")
    ap.add_argument("--confirm-long", action="store_true")
    args = ap.parse_args()

    argv = ["-v", "reproduce-grid", "--scale", args.scale, "--seed", str(args.seed), "--out-dir", args.out_dir]
    argv += [flag for flag, on in (("--mlp", args.mlp), ("--no-aisbn", args.no_aisbn),
                                   ("--confirm-long", args.confirm_long)) if on]
    status = cli_main(argv)
    if status == 0:
        summarize(Path(args.out_dir))
    return status


if __name__ == "__main__":
    sys.exit(main())
