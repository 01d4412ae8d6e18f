"""Output writers: seismogram/energy/statistics CSV families and legacy
ASCII VTK field dumps, plus receiver sampling.

CSV numerics use 17 significant digits so that written values round-trip
exactly at double precision; VTK point data uses 9 significant digits.
"""

import numpy as np

from .assembly import locate_point
from .mesh import tri_inverse


def fmt(x):
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# CSV families

ENERGY_HEADER = "t,kinetic,elastic,total"
STATS_HEADER = "step,t,iterations,residual"
SEISMOGRAM_HEADER = "t,u,v,sxx,syy,sxy"
CONVERGENCE_HEADER = ("mesh,n_triangles,h,err_u,err_v,err_sxx,err_syy,err_sxy,"
                      "order_u,order_v,order_sxx,order_syy,order_sxy,wall_time")
SLIVER_HEADER = "mesh,preconditioner,mean_iterations"


def write_energy_csv(path, records):
    with open(path, "w") as f:
        f.write(ENERGY_HEADER + "\n")
        for r in records:
            f.write(",".join(fmt(r[k]) for k in ("t", "kinetic", "elastic",
                                                 "total")) + "\n")


def write_statistics_csv(path, records):
    with open(path, "w") as f:
        f.write(STATS_HEADER + "\n")
        for r in records:
            f.write(f"{r['step']},{fmt(r['t'])},{r['iterations']},"
                    f"{fmt(r['residual'])}\n")


def write_seismogram_csv(path, rows):
    """rows: iterable of (t, u, v, sxx, syy, sxy)."""
    with open(path, "w") as f:
        f.write(SEISMOGRAM_HEADER + "\n")
        for row in rows:
            f.write(",".join(fmt(v) for v in row) + "\n")


def write_convergence_csv(path, rows):
    with open(path, "w") as f:
        f.write(CONVERGENCE_HEADER + "\n")
        for r in rows:
            errs = ",".join(fmt(e) for e in r["errors"])
            orders = ",".join(fmt(o) for o in r["orders"])
            f.write(f"{r['mesh']},{r['n_triangles']},{fmt(r['h'])},{errs},"
                    f"{orders},{fmt(r['wall_time'])}\n")


def write_sliver_csv(path, rows):
    with open(path, "w") as f:
        f.write(SLIVER_HEADER + "\n")
        for r in rows:
            f.write(f"{r['mesh']},{r['preconditioner']},"
                    f"{fmt(r['mean_iterations'])}\n")


# ---------------------------------------------------------------------------
# Point sampling

def _covering_sector(ops, i, point):
    """(cell, side) of the dual cell whose sub-element covers the point;
    ties broken toward the lowest edge index."""
    conn = ops.conn
    best = None
    best_min = -np.inf
    for j in sorted(conn.tri_edges[i]):
        c = ops.dual.edge_to_cell[j]
        side = 0 if ops.cells.ell[c] == i else 1
        verts = ops.dual.cells[c].sub_tris[side][1]
        lam = _barycentric(verts, point)
        m = lam.min()
        if m >= -1e-9:
            return c, side
        if m > best_min:
            best, best_min = (c, side), m
    return best


def _nearest_edge(ops, i, point):
    conn = ops.conn
    best_j, best_d = -1, np.inf
    for j in conn.tri_edges[i]:
        a, b = ops.mesh.nodes[conn.edges[j]]
        d = _point_segment_distance(point, a, b)
        if d < best_d or (d == best_d and j < best_j):
            best_j, best_d = j, d
    return best_j


def _point_segment_distance(p, a, b):
    t = np.clip(np.dot(p - a, b - a) / np.dot(b - a, b - a), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * (b - a))))


def _barycentric(verts, p):
    J = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
    lam12 = np.linalg.solve(J, p - verts[0])
    return np.array([1.0 - lam12.sum(), lam12[0], lam12[1]])


def _eval_stress_at(ops, cell, side, point):
    p_unf = point + ops.cells.sub_shift[cell, side]
    xi = ops.cells.charts.coords_single(cell, p_unf)
    return ops.basis.dual.eval(xi.reshape(1, 2))[0]


class ReceiverSampler:
    """Samples slice-end traces at fixed points.

    Velocity comes from the containing element's polynomial; stress from the
    dual cell of the nearest edge of that element.
    """

    def __init__(self, ops, receivers):
        self.ops = ops
        self.entries = []
        for rec in receivers:
            pos = np.asarray(rec.position, dtype=float)
            i = locate_point(ops.mesh, pos)
            xi = tri_inverse(ops.elem.verts[i], pos)
            phi = ops.basis.primal.eval(xi)[0]
            j = _nearest_edge(ops, i, pos)
            c = ops.dual.edge_to_cell[j]
            side = 0 if ops.cells.ell[c] == i else 1
            psi = _eval_stress_at(ops, c, side, pos)
            self.entries.append((rec.id, i, phi, c, psi))
        self.rows = {rec.id: [] for rec in receivers}

    def sample(self, state):
        g1 = self.ops.time.g1
        vtr = state.v @ g1
        str_tr = state.sigma @ g1
        for rid, i, phi, c, psi in self.entries:
            uv = vtr[i] @ phi
            sig = str_tr[c] @ psi
            self.rows[rid].append((state.t, uv[0], uv[1], sig[0], sig[1], sig[2]))


# ---------------------------------------------------------------------------
# Legacy VTK

def _lattice(level):
    pts = [(a / level, b / level) for a in range(level + 1)
           for b in range(level + 1 - a)]
    index = {}
    k = 0
    for a in range(level + 1):
        for b in range(level + 1 - a):
            index[(a, b)] = k
            k += 1
    cells = []
    for a in range(level):
        for b in range(level - a):
            cells.append((index[(a, b)], index[(a + 1, b)], index[(a, b + 1)]))
            if a + b < level - 1:
                cells.append((index[(a + 1, b)], index[(a + 1, b + 1)],
                              index[(a, b + 1)]))
    return np.array(pts), np.array(cells)


def write_vtk(path, ops, state, level=1):
    """ASCII legacy VTK dump of the slice-end traces, each triangle sampled on
    a barycentric lattice subdivided into level^2 sub-triangles."""
    if level < 1:
        raise ValueError("subdivision level must be >= 1")
    mesh = ops.mesh
    ref_pts, ref_cells = _lattice(level)
    phi = ops.basis.primal.eval(ref_pts)               # (npl, n_phi)
    g1 = ops.time.g1
    vtr = state.v @ g1
    str_tr = state.sigma @ g1
    npl = len(ref_pts)

    points = []
    values = {name: [] for name in ("u", "v", "sxx", "syy", "sxy")}
    cells = []
    cell_region = []
    for i in range(mesh.n_triangles):
        verts = ops.elem.verts[i]
        phys = verts[0] + ref_pts @ ops.elem.J[i].T
        uv = phi @ vtr[i].T                            # (npl, 2)
        base = len(points)
        for q in range(npl):
            p = phys[q]
            c, side = _covering_sector(ops, i, p)
            psi = _eval_stress_at(ops, c, side, p)
            sig = str_tr[c] @ psi
            points.append(p)
            values["u"].append(uv[q, 0])
            values["v"].append(uv[q, 1])
            values["sxx"].append(sig[0])
            values["syy"].append(sig[1])
            values["sxy"].append(sig[2])
        for tri in ref_cells:
            cells.append(base + tri)
            cell_region.append(mesh.region_id[i])

    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"stagdg fields t={state.t:.9g}\n")
        f.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {len(points)} double\n")
        for p in points:
            f.write(f"{p[0]:.9g} {p[1]:.9g} 0\n")
        f.write(f"CELLS {len(cells)} {4 * len(cells)}\n")
        for tri in cells:
            f.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")
        f.write(f"CELL_TYPES {len(cells)}\n")
        f.write("\n".join(["5"] * len(cells)) + "\n")
        f.write(f"POINT_DATA {len(points)}\n")
        for name in ("u", "v", "sxx", "syy", "sxy"):
            f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            f.write("\n".join(f"{val:.9g}" for val in values[name]) + "\n")
        f.write(f"CELL_DATA {len(cells)}\n")
        f.write("SCALARS region_id int 1\nLOOKUP_TABLE default\n")
        f.write("\n".join(str(int(r)) for r in cell_region) + "\n")
