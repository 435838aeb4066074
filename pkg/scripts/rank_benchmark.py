#!/usr/bin/env python3
"""Rank the bundled benchmark scores and test pairwise significance.

Ranks every method per dataset and metric (fractional ranks, 1 is best,
error percentage inverted), averages the ranks over datasets, derives the
rank dispersion (SSE and MSE), and runs the studentized-range test on all
method pairs.

Example:
    python3 scripts/rank_benchmark.py
    python3 scripts/rank_benchmark.py --mse 0.1805 --out results/
"""

from __future__ import annotations

import argparse
from pathlib import Path

from ffcae.cli import bundled_scores_path
from ffcae.ranking import (
    ScoreCube,
    mse_from_ranks,
    rank_methods,
    rank_sse,
    tukey_hsd,
)


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--scores",
        help="score CSV with columns method,dataset,metric,value "
        "(default: the bundled benchmark table)",
    )
    parser.add_argument("--n", type=int, default=5, help="samples per group")
    parser.add_argument(
        "--mse",
        default="auto",
        help="mean-square error for the range statistic, or 'auto'",
    )
    parser.add_argument("--nu", type=int, default=32, help="error degrees of freedom")
    parser.add_argument("--q-critical", type=float, default=4.5209)
    parser.add_argument("--out", help="optional output directory")
    return parser.parse_args()


def main() -> int:
    args = parse_args()
    source = Path(args.scores) if args.scores else bundled_scores_path()
    cube = ScoreCube.from_csv(source)
    table = rank_methods(cube)

    sse = rank_sse(table)
    if args.mse == "auto":
        mse = mse_from_ranks(table, nu=args.nu)
    else:
        mse = float(args.mse)

    print(f"scores: {source}")
    print(f"{len(cube.methods)} methods x {len(cube.datasets)} datasets "
          f"x {len(cube.metrics)} metrics")
    print()
    print(table.to_csv(), end="")
    means = table.method_means
    print(
        "mean,"
        + ",".join(f"{v:.4f}" for v in means)
    )
    print()
    print(f"rank SSE = {sse:.4f}, MSE = {mse:.4f} (nu={args.nu})")
    result = tukey_hsd(table, n=args.n, mse=mse, q_critical=args.q_critical)
    print(result.report(), end="")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "rank_table.csv").write_text(table.to_csv())
        (out / "tukey_q.csv").write_text(result.to_csv())
        (out / "significance.txt").write_text(result.report())
        print(f"\nwrote rank_table.csv, tukey_q.csv, significance.txt in {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
