#!/usr/bin/env python3
"""Seismogram overlay: one panel per state component, optionally comparing a
run against a reference trace.

    python plot_seismograms.py --in out/seismogram_r1.csv --out r1.png
    python plot_seismograms.py --in run.csv --ref reference.csv --out cmp.png
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from csv_schema import SchemaError, read_table

COMPONENTS = ["u", "v", "sxx", "syy", "sxy"]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--in", dest="inp", required=True)
    ap.add_argument("--ref", default=None, help="reference seismogram CSV")
    ap.add_argument("--out", required=True)
    ap.add_argument("--components", default=",".join(COMPONENTS))
    args = ap.parse_args(argv)

    comps = [c for c in args.components.split(",") if c]
    bad = [c for c in comps if c not in COMPONENTS]
    if bad:
        print(f"error: unknown components {bad}", file=sys.stderr)
        return 2
    try:
        run = read_table(args.inp, "seismogram")
        ref = read_table(args.ref, "seismogram") if args.ref else None
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    fig, axes = plt.subplots(len(comps), 1, figsize=(8, 2.1 * len(comps)),
                             sharex=True, squeeze=False)
    for ax, c in zip(axes[:, 0], comps):
        ax.plot(run["t"], run[c], label="run", lw=1.3)
        if ref is not None:
            ax.plot(ref["t"], ref[c], label="reference", lw=1.0, ls="--")
        ax.set_ylabel(c)
        ax.grid(alpha=0.3)
    axes[0, 0].legend(loc="best")
    axes[-1, 0].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(args.out, dpi=130)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
