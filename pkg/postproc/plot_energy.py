#!/usr/bin/env python3
"""Energy-vs-time trace from an energy.csv, with the initial total energy
drawn as a horizontal reference line.

    python plot_energy.py --in out/energy.csv --out energy.png
    python plot_energy.py --in out/energy.csv --out energy.png --assert-flat 1e-8

--assert-flat checks the relative total-energy deviation numerically before
rendering (for conserving Crank-Nicolson runs).
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
    ap.add_argument("--assert-flat", type=float, default=None, metavar="RTOL",
                    help="fail if |E(t)-E(0)|/E(0) exceeds RTOL")
    args = ap.parse_args(argv)

    try:
        tab = read_table(args.inp, "energy")
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    e0 = tab["total"][0]
    if args.assert_flat is not None:
        dev = np.abs(tab["total"] - e0).max() / abs(e0)
        if dev > args.assert_flat:
            print(f"error: energy deviates by {dev:.3e} > {args.assert_flat:g}",
                  file=sys.stderr)
            return 1
        print(f"energy flat to {dev:.3e} (tolerance {args.assert_flat:g})")

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(tab["t"], tab["kinetic"], label="kinetic", lw=1.2)
    ax.plot(tab["t"], tab["elastic"], label="elastic", lw=1.2)
    ax.plot(tab["t"], tab["total"], label="total", lw=1.8, color="k")
    ax.axhline(e0, color="r", ls="--", lw=1.0, label="initial total")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=130)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
