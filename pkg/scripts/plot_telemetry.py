"""Plot per-generation gene mean and spread from a telemetry CSV.

    python3 scripts/plot_telemetry.py runs/demo/telemetry.csv -o runs/demo/genes.png

Needs matplotlib.
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("telemetry")
    ap.add_argument("-o", "--output", default="genes.png")
    a = ap.parse_args()

    series = defaultdict(lambda: ([], [], []))
    with open(a.telemetry, newline="") as fh:
        for row in csv.DictReader(fh):
            gen, mean, std = series[row["gene"]]
            gen.append(int(row["generation"]))
            mean.append(float(row["mean"]))
            std.append(float(row["std"]))

    names = sorted(series)
    cols = 4
    rows = -(-len(names) // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.2 * rows), sharex=True, squeeze=False)
    for ax, name in zip(axes.flat, names):
        gen, mean, std = series[name]
        lo = [m - s for m, s in zip(mean, std)]
        hi = [m + s for m, s in zip(mean, std)]
        ax.plot(gen, mean, lw=1.2)
        ax.fill_between(gen, lo, hi, alpha=0.25)
        ax.set_title(name, fontsize=8)
        ax.tick_params(labelsize=7)
    for ax in list(axes.flat)[len(names):]:
        ax.axis("off")
    fig.supxlabel("generation")
    fig.tight_layout()
    fig.savefig(a.output, dpi=130)
    print(f"wrote {a.output}")


if __name__ == "__main__":
    main()
