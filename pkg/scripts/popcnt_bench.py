"""Popcount study: search time of both backends against adapter-family size.

Writes the same CSV as ``adaptsynth bench`` and prints a small table with the
growth factor between consecutive concrete-backend medians.
"""
import argparse
import csv

from adaptsynth.cli import bench_rows, parse_settings
from adaptsynth.config import RunConfig, parse_family


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--settings", default="1:2,1:11,2:11,3:11,4:11", help="k:B pairs")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default="popcnt_bench.csv")
    a = p.parse_args()

    cfg = RunConfig(parse_family("argsub"), seed=a.seed)
    rows = bench_rows(parse_settings(a.settings), ["symbolic", "concrete"], cfg, a.repeats)
    with open(a.csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["family_size", "backend", "search_time_secs", "verdict"])
        for size, backend, secs, verdict, *_ in rows:
            w.writerow([size, backend, f"{secs:.6f}", verdict])

    print(f"{'k':>2} {'B':>3} {'size':>8} {'symbolic':>10} {'concrete':>10} {'growth':>7}  adapter")
    by = {(r[5], r[6], r[1]): r for r in rows}
    prev = None
    for k, b in parse_settings(a.settings):
        s, c = by[k, b, "symbolic"], by[k, b, "concrete"]
        growth = f"{c[2] / prev:.1f}x" if prev else ""
        prev = c[2] or None
        print(f"{k:>2} {b:>3} {s[0]:>8} {s[2]:>9.3f}s {c[2]:>9.3f}s {growth:>7}  {c[4].describe() if c[4] else c[3]}")
    print(f"wrote {a.csv}")


if __name__ == "__main__":
    main()
