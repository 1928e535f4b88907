"""Render figures from the CSV files written by `scn-cache`.

Usage: python3 scripts/plot.py OUT_DIR
Requires matplotlib. Reads misreport.csv, baseline.csv and scaling_summary.csv
when present and writes PNGs next to them.
"""

import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def misreport(out):
    data = rows(out / "misreport.csv")
    fig, ax = plt.subplots()
    for cp in sorted({r["cp"] for r in data}, key=int):
        mine = [r for r in data if r["cp"] == cp]
        ax.plot([float(r["declared_type"]) for r in mine], [float(r["backhaul_bits"]) for r in mine],
                marker="o", label=f"CP {cp} (type {float(mine[0]['true_type']):g})")
    ax.set_xlabel("declared type")
    ax.set_ylabel("backhaul bits")
    ax.legend()
    fig.savefig(out / "misreport.png", dpi=150)


def baseline(out):
    data = rows(out / "baseline.csv")
    x = range(len(data))
    fig, ax = plt.subplots()
    ax.bar([i - 0.2 for i in x], [float(r["utility_mechanism"]) for r in data], width=0.4, label="mechanism")
    ax.bar([i + 0.2 for i in x], [float(r["utility_equal_split"]) for r in data], width=0.4, label="equal split")
    ax.set_xticks(list(x), [f"{float(r['type']):g}" for r in data])
    ax.set_xlabel("CP type")
    ax.set_ylabel("utility")
    ax.legend()
    fig.savefig(out / "baseline.png", dpi=150)


def scaling(out):
    data = rows(out / "scaling_summary.csv")
    fig, ax = plt.subplots()
    for alpha in sorted({r["alpha"] for r in data}, key=float):
        cells = [r for r in data if r["alpha"] == alpha]
        ax.plot([int(r["cp_count"]) for r in cells], [float(r["mean_utility"]) for r in cells],
                marker="o", label=f"Zipf {float(alpha):g}")
    ax.set_xlabel("number of CPs")
    ax.set_ylabel("mean CP utility")
    ax.legend()
    fig.savefig(out / "scaling.png", dpi=150)


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "out")
    for name, draw in [("misreport.csv", misreport), ("baseline.csv", baseline), ("scaling_summary.csv", scaling)]:
        if (out / name).exists():
            draw(out)


if __name__ == "__main__":
    main()
