"""Primal triangular mesh, edge connectivity, and the edge-based staggered dual
mesh.

The primal mesh carries the velocity unknowns; every edge owns a quadrilateral
dual cell (two barycenters + the two edge endpoints) that carries the stress
unknowns.  Periodic boundaries are realized by pairing opposite boundary edges
at the connectivity level, so a paired dual cell wraps across the box; its
right half lives in an "unfolded" frame translated by the box period.
"""

import warnings
from dataclasses import dataclass

import numpy as np


class MeshError(Exception):
    pass


class MeshFormatError(MeshError):
    pass


class InvertedElementError(MeshError):
    pass


@dataclass(frozen=True)
class PeriodicBox:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    @property
    def diameter(self):
        return float(np.hypot(self.xmax - self.xmin, self.ymax - self.ymin))


def _signed_areas(nodes, triangles):
    a = nodes[triangles[:, 0]]
    b = nodes[triangles[:, 1]]
    c = nodes[triangles[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


class PrimalMesh:
    """Triangulation with per-triangle region tags.

    Triangles are stored counterclockwise; construction validates index
    ranges, orientation and duplicates.
    """

    def __init__(self, nodes, triangles, region_id=None, periodic_box=None):
        self.nodes = np.asarray(nodes, dtype=float).reshape(-1, 2)
        self.triangles = np.asarray(triangles, dtype=int).reshape(-1, 3)
        if region_id is None:
            region_id = np.zeros(len(self.triangles), dtype=int)
        self.region_id = np.asarray(region_id, dtype=int)
        self.periodic_box = periodic_box
        self._validate()
        self.areas = _signed_areas(self.nodes, self.triangles)
        self.barycenters = self.nodes[self.triangles].mean(axis=1)

    def _validate(self):
        n = len(self.nodes)
        bad = np.where((self.triangles < 0) | (self.triangles >= n))[0]
        if bad.size:
            t = bad[0]
            raise MeshError(f"triangle {t} references node index outside [0, {n})"
                            f": {self.triangles[t].tolist()}")
        areas = _signed_areas(self.nodes, self.triangles)
        degenerate = np.where(np.abs(areas) < 1e-300)[0]
        if degenerate.size:
            raise MeshError(f"triangle {degenerate[0]} is degenerate (zero area)")
        flipped = np.where(areas < 0)[0]
        if flipped.size:
            raise MeshError(f"triangle {flipped[0]} is clockwise; use read_mesh or "
                            "reorient before constructing PrimalMesh")
        key = np.sort(self.triangles, axis=1)
        _, counts = np.unique(key, axis=0, return_counts=True)
        if (counts > 1).any():
            raise MeshError("duplicate triangles in mesh")

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_nodes(self):
        return len(self.nodes)

    def triangle_vertices(self, i):
        return self.nodes[self.triangles[i]]

    def median_edge_length(self):
        v = self.nodes[self.triangles]
        e = np.concatenate([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]])
        return float(np.median(np.hypot(e[:, 0], e[:, 1])))


def _orient_ccw(nodes, triangles):
    triangles = np.array(triangles, dtype=int)
    areas = _signed_areas(np.asarray(nodes, dtype=float), triangles)
    flip = areas < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


# ---------------------------------------------------------------------------
# Readers

def read_mesh(path):
    """Read a native or Gmsh-2.2 ASCII mesh; triangles are reoriented ccw."""
    with open(path) as f:
        text = f.read()
    head = text.lstrip()[:16]
    if head.startswith("$MeshFormat"):
        return _read_gmsh(text, path)
    return _read_native(text, path)


def _read_native(text, path):
    lines = text.splitlines()
    pos = 0

    def next_tokens():
        nonlocal pos
        while pos < len(lines):
            ln = pos
            stripped = lines[pos].strip()
            pos += 1
            if stripped and not stripped.startswith("#"):
                return ln + 1, stripped.split()
        return None, None

    ln, tok = next_tokens()
    if tok is None or tok[0].upper() != "NODES" or len(tok) != 2:
        raise MeshFormatError(f"{path}:{ln}: expected 'NODES <n>'")
    n_nodes = int(tok[1])
    nodes = np.empty((n_nodes, 2))
    for k in range(n_nodes):
        ln, tok = next_tokens()
        if tok is None or len(tok) != 2:
            raise MeshFormatError(f"{path}:{ln}: expected '<x> <y>' for node {k}")
        try:
            nodes[k] = [float(tok[0]), float(tok[1])]
        except ValueError:
            raise MeshFormatError(f"{path}:{ln}: bad node coordinates {tok}")
    ln, tok = next_tokens()
    if tok is None or tok[0].upper() != "TRIANGLES" or len(tok) != 2:
        raise MeshFormatError(f"{path}:{ln}: expected 'TRIANGLES <m>'")
    n_tri = int(tok[1])
    tris = np.empty((n_tri, 3), dtype=int)
    regions = np.empty(n_tri, dtype=int)
    for k in range(n_tri):
        ln, tok = next_tokens()
        if tok is None or len(tok) != 4:
            raise MeshFormatError(f"{path}:{ln}: expected '<i1> <i2> <i3> <region>' "
                                  f"for triangle {k}")
        try:
            tris[k] = [int(tok[0]), int(tok[1]), int(tok[2])]
            regions[k] = int(tok[3])
        except ValueError:
            raise MeshFormatError(f"{path}:{ln}: bad triangle line {tok}")
        if (tris[k] < 0).any() or (tris[k] >= n_nodes).any():
            raise MeshFormatError(f"{path}:{ln}: triangle {k} references node index "
                                  f"outside [0, {n_nodes})")
    box = None
    ln, tok = next_tokens()
    if tok is not None:
        if tok[0].upper() == "PERIODIC" and len(tok) == 6 and tok[1].upper() == "BOX":
            box = PeriodicBox(*(float(v) for v in tok[2:6]))
        else:
            raise MeshFormatError(f"{path}:{ln}: unexpected trailing content {tok}")
    tris = _orient_ccw(nodes, tris)
    return PrimalMesh(nodes, tris, regions, periodic_box=box)


def _read_gmsh(text, path):
    lines = text.splitlines()
    try:
        i_nodes = lines.index("$Nodes")
        i_elems = lines.index("$Elements")
    except ValueError:
        raise MeshFormatError(f"{path}: missing $Nodes or $Elements section")
    n_nodes = int(lines[i_nodes + 1])
    ids = {}
    nodes = np.empty((n_nodes, 2))
    for k in range(n_nodes):
        ln = i_nodes + 2 + k
        tok = lines[ln].split()
        if len(tok) < 3:
            raise MeshFormatError(f"{path}:{ln + 1}: bad node line")
        ids[int(tok[0])] = k
        nodes[k] = [float(tok[1]), float(tok[2])]
    n_elems = int(lines[i_elems + 1])
    tris, regions = [], []
    skipped = set()
    for k in range(n_elems):
        ln = i_elems + 2 + k
        tok = lines[ln].split()
        etype = int(tok[1])
        ntags = int(tok[2])
        if etype != 2:
            skipped.add(etype)
            continue
        conn = tok[3 + ntags:]
        if len(conn) != 3:
            raise MeshFormatError(f"{path}:{ln + 1}: triangle element with "
                                  f"{len(conn)} nodes")
        try:
            tris.append([ids[int(c)] for c in conn])
        except KeyError as e:
            raise MeshFormatError(f"{path}:{ln + 1}: element references unknown "
                                  f"node id {e.args[0]}")
        regions.append(int(tok[3]) if ntags > 0 else 0)
    if skipped:
        warnings.warn(f"{path}: ignored gmsh element types {sorted(skipped)}")
    if not tris:
        raise MeshFormatError(f"{path}: no triangles (element type 2) found")
    tris = _orient_ccw(nodes, np.array(tris))
    return PrimalMesh(nodes, tris, np.array(regions))


def write_native_mesh(path, mesh):
    """Write a PrimalMesh in the native ASCII format."""
    with open(path, "w") as f:
        f.write(f"NODES {mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            f.write(f"{x:.17g} {y:.17g}\n")
        f.write(f"TRIANGLES {mesh.n_triangles}\n")
        for tri, reg in zip(mesh.triangles, mesh.region_id):
            f.write(f"{tri[0]} {tri[1]} {tri[2]} {reg}\n")
        if mesh.periodic_box is not None:
            b = mesh.periodic_box
            f.write(f"PERIODIC BOX {b.xmin:.17g} {b.xmax:.17g} "
                    f"{b.ymin:.17g} {b.ymax:.17g}\n")


# ---------------------------------------------------------------------------
# Edge connectivity

class EdgeConnectivity:
    """Edges, left/right triangles, per-triangle edge sets and normals.

    For an interior edge, left(j) is the smaller triangle index.  Periodic
    pairs are merged into one logical edge whose canonical representative is
    the copy owned by the left triangle; n_j is the outward normal of the left
    triangle on its copy.
    """

    def __init__(self, mesh, edges, left, right, tri_edges, partner, canon, shift):
        self.mesh = mesh
        self.edges = edges              # (E, 2) node ids, canonical copy geometry
        self._left = left               # (E,) per canonical edge; -1 elsewhere
        self._right = right
        self.tri_edges = tri_edges      # (M, 3) raw edge ids, S_i
        self.periodic_partner = partner  # (E,) or -1
        self.canon = canon              # (E,) canonical edge id
        self.shift = shift              # (E, 2) translation own copy -> canonical frame
        self._build_geometry()

    def _build_geometry(self):
        mesh = self.mesh
        E = len(self.edges)
        self.is_boundary = np.array([self._right[self.canon[j]] < 0 for j in range(E)])
        self.boundary_set = np.where(self.is_boundary)[0]
        # normals and oriented endpoints per canonical edge
        self.normal = np.zeros((E, 2))
        self.point_a = np.zeros((E, 2))
        self.point_b = np.zeros((E, 2))
        for j in range(E):
            if self.canon[j] != j:
                continue
            li = self._left[j]
            va, vb = mesh.nodes[self.edges[j, 0]], mesh.nodes[self.edges[j, 1]]
            t = vb - va
            n = np.array([t[1], -t[0]])
            n /= np.linalg.norm(n)
            # outward from the left triangle: away from its barycenter
            mid = 0.5 * (va + vb)
            if np.dot(n, mid - mesh.barycenters[li]) < 0:
                n = -n
            # orient (A, B) so that B - A is n rotated +90deg (ccw dual quad)
            t_hat = np.array([-n[1], n[0]])
            if np.dot(vb - va, t_hat) > 0:
                a, b = va, vb
            else:
                a, b = vb, va
            self.normal[j] = n
            self.point_a[j] = a
            self.point_b[j] = b
        for j in range(E):
            c = self.canon[j]
            if c != j:
                self.normal[j] = self.normal[c]
                self.point_a[j] = self.point_a[c]
                self.point_b[j] = self.point_b[c]

    @property
    def n_edges(self):
        return len(self.edges)

    def left(self, j):
        return int(self._left[self.canon[j]])

    def right(self, j):
        return int(self._right[self.canon[j]])

    def is_interior(self, j):
        return self.right(j) >= 0

    def neighbor(self, i, j):
        """Triangle sharing edge j with triangle i (wp(i,j)); -1 on boundary."""
        li, ri = self.left(j), self.right(j)
        if i == li:
            return ri
        if i == ri:
            return li
        raise ValueError(f"edge {j} is not an edge of triangle {i}")

    def sign(self, i, j):
        """s_{i,j} = (r - 2i + l)/(r - l); +1 on boundary edges by convention."""
        if j not in self.tri_edges[i]:
            raise ValueError(f"edge {j} not in S_{i}")
        li, ri = self.left(j), self.right(j)
        if ri < 0:
            return 1
        return (ri - 2 * i + li) // (ri - li)

    def edge_length(self, j):
        c = self.canon[j]
        return float(np.linalg.norm(self.point_b[c] - self.point_a[c]))


def build_connectivity(mesh, periodic=None):
    """Build edge connectivity; `periodic` overrides mesh.periodic_box."""
    if periodic is None:
        periodic = mesh.periodic_box
    tris = mesh.triangles
    M = len(tris)
    local = np.stack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=1)
    flat = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(flat, axis=0, return_inverse=True,
                                       return_counts=True)
    if (counts > 2).any():
        j = int(np.where(counts > 2)[0][0])
        raise MeshError(f"non-manifold edge {j} (nodes {edges[j].tolist()}) shared "
                        f"by {counts[j]} triangles")
    tri_edges = inverse.reshape(M, 3)
    E = len(edges)

    owner = np.full((E, 2), -1, dtype=int)
    order = np.argsort(inverse, kind="stable")
    tri_ids = np.repeat(np.arange(M), 3)[order]
    sorted_edges = inverse[order]
    starts = np.searchsorted(sorted_edges, np.arange(E))
    owner[:, 0] = tri_ids[starts]
    shared = counts == 2
    owner[shared, 1] = tri_ids[starts[shared] + 1]

    left = np.full(E, -1, dtype=int)
    right = np.full(E, -1, dtype=int)
    left[~shared] = owner[~shared, 0]
    left[shared] = owner[shared].min(axis=1)
    right[shared] = owner[shared].max(axis=1)

    partner = np.full(E, -1, dtype=int)
    canon = np.arange(E)
    shift = np.zeros((E, 2))
    if periodic is not None:
        _pair_periodic(mesh, edges, left, right, counts, partner, canon, shift,
                       periodic)
    return EdgeConnectivity(mesh, edges, left, right, tri_edges, partner, canon,
                            shift)


def _pair_periodic(mesh, edges, left, right, counts, partner, canon, shift, box):
    tol = 1e-9 * box.diameter
    mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    boundary = np.where(counts == 1)[0]
    sides = {"xmin": [], "xmax": [], "ymin": [], "ymax": []}
    for j in boundary:
        pts = mesh.nodes[edges[j]]
        on = [name for name, (axis, val) in
              [("xmin", (0, box.xmin)), ("xmax", (0, box.xmax)),
               ("ymin", (1, box.ymin)), ("ymax", (1, box.ymax))]
              if np.all(np.abs(pts[:, axis] - val) < tol)]
        if len(on) > 1:
            raise MeshError(f"periodic pairing: boundary edge {j} lies on "
                            f"{len(on)} box sides")
        if on:
            sides[on[0]].append(j)
        # edges off the box (e.g. an interior cavity) stay free-surface

    def match(lo, hi, axis):
        period = (box.xmax - box.xmin, box.ymax - box.ymin)[axis]
        other = 1 - axis
        lo_sorted = sorted(lo, key=lambda j: mids[j, other])
        hi_sorted = sorted(hi, key=lambda j: mids[j, other])
        if len(lo_sorted) != len(hi_sorted):
            raise MeshError(f"periodic pairing: {len(lo_sorted)} vs "
                            f"{len(hi_sorted)} edges on opposite box sides")
        for j1, j2 in zip(lo_sorted, hi_sorted):
            if abs(mids[j1, other] - mids[j2, other]) > tol:
                raise MeshError(f"periodic pairing: edge {j1} has no matching "
                                f"partner (midpoint mismatch)")
            partner[j1], partner[j2] = j2, j1
            t1, t2 = left[j1], left[j2]
            if t1 == t2:
                raise MeshError(f"periodic pairing of edges {j1},{j2} makes a "
                                "triangle its own neighbor; mesh too coarse")
            lo_j, hi_j = (j1, j2) if t1 < t2 else (j2, j1)
            c = lo_j
            canon[j1] = canon[j2] = c
            left[c], right[c] = min(t1, t2), max(t1, t2)
            other_j = hi_j
            left[other_j] = right[other_j] = -2  # defer to canonical
            d = np.zeros(2)
            d[axis] = period if mids[other_j, axis] < mids[c, axis] else -period
            shift[other_j] = d

    match(sides["xmin"], sides["xmax"], 0)
    match(sides["ymin"], sides["ymax"], 1)


# ---------------------------------------------------------------------------
# Dual mesh

def _mirror_across(p, a, b):
    t = b - a
    t = t / np.linalg.norm(t)
    d = p - a
    return a + 2.0 * (d @ t) * t - d


class DualCell:
    """Edge-based dual control volume: two barycenters + the edge endpoints.

    For a boundary edge the geometric cell is the interior half only; the
    fourth chart vertex is the interior barycenter mirrored across the edge so
    the bilinear reference map stays non-degenerate.
    """

    __slots__ = ("edge", "left", "right", "boundary", "A", "B", "normal",
                 "quad", "sub_tris", "sub_shifts", "sub_signs", "area",
                 "sub_areas")

    def __init__(self, edge, left, right, boundary, A, B, normal, quad,
                 sub_tris, sub_shifts, sub_signs, sub_areas):
        self.edge = edge
        self.left = left
        self.right = right
        self.boundary = boundary
        self.A = A
        self.B = B
        self.normal = normal
        self.quad = quad
        self.sub_tris = sub_tris      # list of (tri_index, own-frame verts (3,2))
        self.sub_shifts = sub_shifts  # own frame + shift = unfolded frame
        self.sub_signs = sub_signs    # s_{i,j} per sub element
        self.sub_areas = sub_areas
        self.area = float(np.sum(sub_areas))


class DualMesh:
    def __init__(self, mesh, conn, cells, edge_to_cell):
        self.mesh = mesh
        self.conn = conn
        self.cells = cells
        self.edge_to_cell = edge_to_cell  # (E,) raw edge id -> dual cell index
        self.areas = np.array([c.area for c in cells])

    @property
    def n_cells(self):
        return len(self.cells)


def build_dual(mesh, conn):
    """Construct the dual quadrilateral cells and their sub-elements."""
    cells = []
    edge_to_cell = np.full(conn.n_edges, -1, dtype=int)
    for j in range(conn.n_edges):
        if conn.canon[j] != j:
            continue
        li, ri = conn.left(j), conn.right(j)
        A, B, n = conn.point_a[j], conn.point_b[j], conn.normal[j]
        bary_l = mesh.barycenters[li]
        sub_tris, sub_shifts, sub_signs, sub_areas = [], [], [], []
        vl = np.array([bary_l, A, B])
        sub_tris.append((li, vl))
        sub_shifts.append(np.zeros(2))
        sub_signs.append(1)
        sub_areas.append(abs(_signed_areas(vl, np.array([[0, 1, 2]]))[0]))
        if ri >= 0:
            pj = conn.periodic_partner[j]
            sh = np.zeros(2) if pj < 0 else -conn.shift[pj]
            # own-frame copy of the edge for the right triangle
            A_r, B_r = A + sh, B + sh
            bary_r_own = mesh.barycenters[ri]
            vr = np.array([bary_r_own, A_r, B_r])
            sub_tris.append((ri, vr))
            sub_shifts.append(-sh)
            sub_signs.append(-1)
            sub_areas.append(abs(_signed_areas(vr, np.array([[0, 1, 2]]))[0]))
            bary_r_unf = bary_r_own - sh
            boundary = False
        else:
            bary_r_unf = _mirror_across(bary_l, A, B)
            boundary = True
        quad = np.array([bary_l, A, bary_r_unf, B])
        cells.append(DualCell(j, li, ri, boundary, A, B, n, quad, sub_tris,
                              sub_shifts, sub_signs, np.array(sub_areas)))
        idx = len(cells) - 1
        edge_to_cell[j] = idx
        if conn.periodic_partner[j] >= 0:
            edge_to_cell[conn.periodic_partner[j]] = idx
    return DualMesh(mesh, conn, cells, edge_to_cell)


# ---------------------------------------------------------------------------
# Reference maps

def tri_reference_map(verts, xi):
    """Affine map of T_std onto the triangle: returns (x, J, detJ)."""
    verts = np.asarray(verts, dtype=float)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    J = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
    detJ = float(np.linalg.det(J))
    if detJ <= 0:
        raise InvertedElementError("triangle has non-positive Jacobian")
    return verts[0] + xi @ J.T, J, detJ


def tri_inverse(verts, x):
    """Reference coordinates of physical points in an affine triangle."""
    verts = np.asarray(verts, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    J = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
    return np.linalg.solve(J, (x - verts[0]).T).T


def quad_reference_map(verts, xi):
    """Bilinear map of [0,1]^2 onto the quad: returns (x, J, detJ)."""
    verts = np.asarray(verts, dtype=float)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    s, t = xi[:, 0:1], xi[:, 1:2]
    v0, v1, v2, v3 = verts
    x = (1 - s) * (1 - t) * v0 + s * (1 - t) * v1 + s * t * v2 + (1 - s) * t * v3
    dxds = (1 - t) * (v1 - v0) + t * (v2 - v3)
    dxdt = (1 - s) * (v3 - v0) + s * (v2 - v1)
    J = np.stack([dxds, dxdt], axis=-1)   # (npts, 2, 2)
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if (detJ <= 0).any():
        raise InvertedElementError("bilinear quad map has non-positive Jacobian")
    return x, J, detJ


def quad_inverse(verts, x, tol=1e-13, maxiter=60):
    """Invert the bilinear map with Newton iteration (quads must be convex)."""
    verts = np.asarray(verts, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    scale = max(np.linalg.norm(verts[2] - verts[0]),
                np.linalg.norm(verts[3] - verts[1]))
    xi = np.full_like(x, 0.5)
    for _ in range(maxiter):
        s, t = xi[:, 0:1], xi[:, 1:2]
        v0, v1, v2, v3 = verts
        f = ((1 - s) * (1 - t) * v0 + s * (1 - t) * v1 + s * t * v2
             + (1 - s) * t * v3 - x)
        if np.abs(f).max() < tol * scale:
            return xi
        dxds = (1 - t) * (v1 - v0) + t * (v2 - v3)
        dxdt = (1 - s) * (v3 - v0) + s * (v2 - v1)
        det = dxds[:, 0] * dxdt[:, 1] - dxds[:, 1] * dxdt[:, 0]
        dxi0 = (f[:, 0] * dxdt[:, 1] - f[:, 1] * dxdt[:, 0]) / det
        dxi1 = (dxds[:, 0] * f[:, 1] - dxds[:, 1] * f[:, 0]) / det
        xi = xi - np.column_stack([dxi0, dxi1])
    raise MeshError("bilinear map inversion did not converge")


def reference_map(verts, xi):
    """Dispatch on the element type: 3 vertices affine, 4 vertices bilinear."""
    verts = np.asarray(verts, dtype=float)
    if verts.shape == (3, 2):
        return tri_reference_map(verts, xi)
    if verts.shape == (4, 2):
        return quad_reference_map(verts, xi)
    raise ValueError(f"unsupported element with vertex array {verts.shape}")
