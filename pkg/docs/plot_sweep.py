"""Plot the four performance curves from a sweep CSV (one figure per node count).

Usage: python docs/plot_sweep.py sweep.csv [out_prefix]
"""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

METRICS = [("delay_s", "mean delay (s)"), ("p_fail", "failure probability"),
           ("reliability", "reliability"), ("throughput_bps", "throughput (bit/s)")]


def load(path):
    series = defaultdict(list)  # (mode, n_nodes) -> [(lambda, row), ...]
    with open(path) as fh:
        for row in csv.DictReader(fh):
            if row.get("status", "ok") != "ok":
                continue
            key = (row["mode"], int(row["n_nodes"]))
            series[key].append((float(row["lambda_fps"]), row))
    return series


def main(argv):
    if len(argv) < 2:
        print(__doc__)
        return 1
    series = load(argv[1])
    prefix = argv[2] if len(argv) > 2 else "sweep"
    node_counts = sorted({n for _, n in series})
    for n in node_counts:
        fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
        for (field, label), ax in zip(METRICS, axes.flat):
            for mode in ("mac_only", "phy_mac"):
                points = sorted(series.get((mode, n), []))
                if points:
                    ax.plot([lam for lam, _ in points],
                            [float(row[field]) for _, row in points],
                            marker=".", label=mode)
            ax.set_ylabel(label)
            ax.grid(True, alpha=0.3)
        for ax in axes[1]:
            ax.set_xlabel("offered load (frames/s)")
        axes[0][0].legend()
        fig.suptitle(f"N = {n} nodes")
        fig.tight_layout()
        out = f"{prefix}_n{n}.png"
        fig.savefig(out, dpi=150)
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
