#!/usr/bin/env python3
"""Iteration-count bar chart for the sliver study CSV (mean GMRES iterations
per mesh and preconditioner).

    python plot_iterations.py --in out/sliver_iterations.csv --out iters.png
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from csv_schema import SchemaError, read_table


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--in", dest="inp", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)

    try:
        tab = read_table(args.inp, "sliver")
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    meshes = sorted(set(tab["mesh"]))
    precs = list(dict.fromkeys(tab["preconditioner"]))
    width = 0.8 / len(meshes)
    x = np.arange(len(precs))
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    for k, mesh in enumerate(meshes):
        vals = []
        for p in precs:
            sel = (tab["mesh"] == mesh) & (tab["preconditioner"] == p)
            vals.append(float(tab["mean_iterations"][sel][0]))
        ax.bar(x + k * width, vals, width, label=mesh)
        for xi, v in zip(x + k * width, vals):
            ax.text(xi, v, f"{v:.0f}", ha="center", va="bottom", fontsize=8)
    ax.set_xticks(x + width * (len(meshes) - 1) / 2)
    ax.set_xticklabels(precs)
    ax.set_ylabel("mean iterations")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=130)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
