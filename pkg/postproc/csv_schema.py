"""Shared CSV-schema helper for the plot scripts.

The solver writes four CSV families; each plot script validates the header it
needs before touching the numbers and fails naming the missing column.
"""

import csv

import numpy as np

SCHEMAS = {
    "seismogram": ["t", "u", "v", "sxx", "syy", "sxy"],
    "energy": ["t", "kinetic", "elastic", "total"],
    "statistics": ["step", "t", "iterations", "residual"],
    "convergence": ["mesh", "n_triangles", "h", "err_u", "err_v", "err_sxx",
                    "err_syy", "err_sxy", "order_u", "order_v", "order_sxx",
                    "order_syy", "order_sxy", "wall_time"],
    "sliver": ["mesh", "preconditioner", "mean_iterations"],
}


class SchemaError(Exception):
    pass


def read_table(path, kind):
    """Read a CSV of the given kind into a dict of column arrays."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for col in SCHEMAS[kind]:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r} "
                                  f"(expected {kind} schema)")
        rows = list(reader)
    out = {}
    for col in header:
        vals = [r[col] for r in rows]
        try:
            out[col] = np.array([float(v) for v in vals])
        except ValueError:
            out[col] = np.array(vals)
    return out
