#!/usr/bin/env python3
"""Log-log convergence plot from a convergence.csv, annotated with the
observed order between the two finest meshes of each component.

    python plot_convergence.py --in out/convergence.csv --out conv.png
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from csv_schema import SchemaError, read_table

COMPONENTS = ["u", "v", "sxx", "syy", "sxy"]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--in", dest="inp", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)

    try:
        tab = read_table(args.inp, "convergence")
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    h = tab["h"]
    fig, ax = plt.subplots(figsize=(6.5, 5))
    for c in COMPONENTS:
        err = tab[f"err_{c}"]
        if len(h) >= 2 and err[-2] > 0 and err[-1] > 0:
            slope = np.log(err[-2] / err[-1]) / np.log(h[-2] / h[-1])
            label = f"{c} (order {slope:.2f})"
        else:
            label = c
        ax.loglog(h, err, "o-", label=label)
    ax.invert_xaxis()
    ax.set_xlabel("h")
    ax.set_ylabel("L2 error")
    ax.grid(which="both", alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(args.out, dpi=130)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
