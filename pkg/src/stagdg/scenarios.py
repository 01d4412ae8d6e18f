"""Reproducible experiment definitions: plane-wave convergence setup, tilted
Lamb problem, layered medium, cavity scattering, and the sliver-element study,
plus the structured mesh generators they run on.

State-vector component order everywhere: U = (sxx, syy, sxy, u, v).
"""

from dataclasses import dataclass, field

import numpy as np

from .assembly import PointSource, RickerWavelet
from .material import wave_speeds
from .mesh import PeriodicBox, PrimalMesh
from .scheme import project_stress, project_velocity, zero_state


class ScenarioError(Exception):
    pass


# ---------------------------------------------------------------------------
# Structured meshes

def rect_mesh(nx, ny, lo=(0.0, 0.0), hi=(1.0, 1.0), periodic=False,
              region_fn=None):
    """Alternating-diagonal triangulation of a box, 2*nx*ny triangles."""
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    nodes = np.array([(x, y) for y in ys for x in xs])

    def nid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    tris = np.array(tris)
    box = PeriodicBox(lo[0], hi[0], lo[1], hi[1]) if periodic else None
    regions = None
    if region_fn is not None:
        bary = nodes[tris].mean(axis=1)
        regions = np.array([int(region_fn(x, y)) for x, y in bary])
    return PrimalMesh(nodes, tris, regions, periodic_box=box)


def graded_surface_mesh(nx, ny, x_extent, surface_fn, region_fn=None):
    """Box-like domain with a curved top boundary y in [0, surface_fn(x)]."""
    xs = np.linspace(0.0, x_extent, nx + 1)
    nodes = []
    for j in range(ny + 1):
        for x in xs:
            nodes.append((x, j / ny * surface_fn(x)))
    nodes = np.array(nodes)

    def nid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    tris = np.array(tris)
    regions = None
    if region_fn is not None:
        bary = nodes[tris].mean(axis=1)
        regions = np.array([int(region_fn(x, y)) for x, y in bary])
    return PrimalMesh(nodes, tris, regions)


def cavity_mesh(n, half_width=2.5, radius=0.25, periodic=True):
    """Square with a polygonal hole approximating the circular cavity.

    Nodes inside the circle are removed; the surviving ring of nearby nodes is
    snapped onto the circle, which keeps triangle quality reasonable.
    """
    xs = np.linspace(-half_width, half_width, n + 1)
    nodes = np.array([(x, y) for y in xs for x in xs])
    h = 2 * half_width / n

    def nid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    tris = np.array(tris)
    r = np.hypot(nodes[:, 0], nodes[:, 1])
    snap = (r >= radius) & (r < radius + 0.85 * h)
    nodes[snap] *= (radius / r[snap])[:, None]
    drop_node = r < radius
    keep_tri = ~drop_node[tris].any(axis=1)
    tris = tris[keep_tri]
    # also drop fully degenerate triangles produced by snapping
    a, b, c = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
    area2 = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - \
        (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
    tris = tris[np.abs(area2) > 1e-12 * h * h]
    used = np.unique(tris)
    remap = -np.ones(len(nodes), dtype=int)
    remap[used] = np.arange(len(used))
    tris = remap[tris]
    nodes = nodes[used]
    flip = area2[np.abs(area2) > 1e-12 * h * h] < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    box = PeriodicBox(-half_width, half_width, -half_width, half_width) \
        if periodic else None
    return PrimalMesh(nodes, tris, periodic_box=box)


def incircle_radii(mesh):
    v = mesh.nodes[mesh.triangles]
    a = np.linalg.norm(v[:, 1] - v[:, 2], axis=1)
    b = np.linalg.norm(v[:, 0] - v[:, 2], axis=1)
    c = np.linalg.norm(v[:, 0] - v[:, 1], axis=1)
    s = 0.5 * (a + b + c)
    return mesh.areas / s


def make_sliver_meshes(n=12, target_ratio=70.0, lo=(-1.5, -1.5), hi=(1.5, 1.5),
                       jitter=0.2, seed=4):
    """Near-uniform periodic triangulation and a copy with two isolated sliver
    elements.

    mesh1 is a lattice triangulation with jittered interior nodes (almost
    uniform, unstructured-like quality).  mesh2 moves, in two triangles far
    apart, one vertex toward the middle of the opposite edge until the worst
    incircle radius has shrunk by roughly target_ratio.  The bisection backs
    off whenever a triangle inverts or a dual kite loses convexity.
    """
    base = rect_mesh(n, n, lo, hi, periodic=True)
    nodes = base.nodes.copy()
    if jitter > 0:
        rng = np.random.default_rng(seed)
        h = (hi[0] - lo[0]) / n
        interior = ((np.abs(nodes[:, 0] - lo[0]) > 1e-12)
                    & (np.abs(nodes[:, 0] - hi[0]) > 1e-12)
                    & (np.abs(nodes[:, 1] - lo[1]) > 1e-12)
                    & (np.abs(nodes[:, 1] - hi[1]) > 1e-12))
        nodes[interior] += (rng.random((int(interior.sum()), 2)) - 0.5) \
            * 2.0 * jitter * h
    tris = base.triangles
    mesh1 = PrimalMesh(nodes, tris, base.region_id,
                       periodic_box=base.periodic_box)
    r_ref = incircle_radii(mesh1).min()

    def pick(frac_i, frac_j):
        # squash one triangle into a thin cap: move a vertex toward the
        # middle of the opposite edge (every dual cell of the sliver keeps a
        # healthy half on the fat neighbor side)
        cell = (int(n * frac_j) * n + int(n * frac_i)) * 2
        tri = tris[cell]
        p = tri[0]
        a, b = nodes[tri[1]], nodes[tri[2]]
        t = np.clip(np.dot(nodes[p] - a, b - a) / np.dot(b - a, b - a),
                    0.35, 0.65)
        return p, nodes[p].copy(), a + t * (b - a)

    picks = [pick(1 / 3, 1 / 3), pick(2 / 3, 2 / 3)]

    def deformed(frac):
        moved = nodes.copy()
        for p, start, foot in picks:
            moved[p] = start + frac * (foot - start)
        return moved

    lo_f, hi_f = 0.0, 0.9999
    for _ in range(60):
        mid = 0.5 * (lo_f + hi_f)
        moved = deformed(mid)
        if _tri_areas(moved, tris).min() <= 0:
            hi_f = mid
            continue
        if r_ref / _incircle_min(moved, tris) < target_ratio:
            lo_f = mid
        else:
            hi_f = mid
    mesh2 = PrimalMesh(deformed(0.5 * (lo_f + hi_f)), tris, base.region_id,
                       periodic_box=base.periodic_box)
    return mesh1, mesh2


def _tri_areas(nodes, tris):
    a, b, c = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


def _incircle_min(nodes, tris):
    v = nodes[tris]
    a = np.linalg.norm(v[:, 1] - v[:, 2], axis=1)
    b = np.linalg.norm(v[:, 0] - v[:, 2], axis=1)
    c = np.linalg.norm(v[:, 0] - v[:, 1], axis=1)
    s = 0.5 * (a + b + c)
    return (_tri_areas(nodes, tris) / s).min()


# ---------------------------------------------------------------------------
# Plane waves

def plane_wave_eigenvectors(material, n):
    """(r_p, r_s) with the direction vector n substituted literally."""
    lam, mu = material.lam, material.mu
    cp, cs = wave_speeds(material)
    nx, ny = n
    r_p = np.array([lam + 2 * mu * nx ** 2, lam + 2 * mu * ny ** 2,
                    2 * mu * nx * ny, -nx * cp, -ny * cp])
    r_s = np.array([-2 * mu * nx * ny, 2 * mu * nx * ny,
                    mu * (nx ** 2 - ny ** 2), ny * cs, -nx * cs])
    return r_p, r_s


def plane_wave_symbol(material, khat):
    """5x5 matrix D(khat) of U_t = D . grad-projected U for a unit direction."""
    lam, mu, rho = material.lam, material.mu, material.rho
    kx, ky = khat
    D = np.zeros((5, 5))
    D[0, 3], D[0, 4] = (lam + 2 * mu) * kx, lam * ky
    D[1, 3], D[1, 4] = lam * kx, (lam + 2 * mu) * ky
    D[2, 3], D[2, 4] = mu * ky, mu * kx
    D[3, 0], D[3, 2] = kx / rho, ky / rho
    D[4, 2], D[4, 1] = kx / rho, ky / rho
    return D


class PlaneWaveSolution:
    """Exact evolution of U(x,0) = c0 * sin(k.x) under the elastic system.

    The constant profile vector is decomposed in the eigenbasis of the
    plane-wave symbol, so every mode (p at c_p, s at c_s, the static mode)
    translates at its own speed; exact for all t.
    """

    def __init__(self, material, k, c0):
        self.k = np.asarray(k, dtype=float)
        self.c0 = np.asarray(c0, dtype=float)
        kn = np.linalg.norm(self.k)
        D = plane_wave_symbol(material, self.k / kn)
        lam_eig, R = np.linalg.eig(D)
        if np.abs(lam_eig.imag).max() > 1e-12:
            raise ScenarioError("plane-wave symbol has complex eigenvalues")
        self.speeds = lam_eig.real * kn          # U_m(x,t) = r_m sin(k.x + lam t)
        self.R = R.real
        self.beta = np.linalg.solve(self.R, self.c0)

    def __call__(self, x, t):
        """U(x, t), shape x (...,2) -> (...,5)."""
        x = np.asarray(x, dtype=float)
        phase = x @ self.k
        out = np.zeros(x.shape[:-1] + (5,))
        for m in range(5):
            if abs(self.beta[m]) < 1e-300:
                continue
            out += (self.beta[m] * np.sin(phase + self.speeds[m] * t))[..., None] \
                * self.R[:, m]
        return out


# ---------------------------------------------------------------------------
# Scenario definitions

_KINDS = ("ps_convergence", "plane_wave_cavity", "lamb_tilted",
          "layered_complex", "sliver_study", "custom")

_REQUIRED = {
    "ps_convergence": ("alpha", "direction", "wavenumber"),
    "plane_wave_cavity": ("alpha",),
    "lamb_tilted": ("source_position", "tilt_angle_deg", "ricker"),
    "layered_complex": ("source_position", "tilt_angle_deg", "ricker"),
    "sliver_study": ("alpha", "direction"),
    "custom": (),
}


@dataclass
class ScenarioSpec:
    """Named experiment with its per-kind physics parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        missing = [k for k in _REQUIRED[self.kind] if k not in self.params]
        if missing:
            raise ScenarioError(f"scenario {self.kind!r} missing parameters "
                                f"{missing}")

    def to_dict(self):
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], dict(d.get("params", {})))


def ps_convergence_spec(alpha=0.1, direction=(1.0, 1.0), wavenumber=None,
                        amp_p=1.0, amp_s=1.0):
    if wavenumber is None:
        wavenumber = [2 * np.pi * direction[0], 2 * np.pi * direction[1]]
    return ScenarioSpec("ps_convergence", {
        "alpha": alpha, "direction": list(direction),
        "wavenumber": list(wavenumber), "amp_p": amp_p, "amp_s": amp_s})


def lamb_spec():
    """The tilted Lamb problem constants (tilt 10 degrees, Ricker source)."""
    return ScenarioSpec("lamb_tilted", {
        "source_position": [1720.0, 2303.18],
        "tilt_angle_deg": 10.0,
        "ricker": {"a1": -2000.0, "f_c": 14.5, "t_D": 0.08},
    })


def scenario_initial_profile(spec, material):
    """U(x) -> (...,5) initial data, or None for zero-initial scenarios."""
    p = spec.params
    if spec.kind in ("ps_convergence", "sliver_study"):
        n = np.asarray(p["direction"], dtype=float)
        k = np.asarray(p.get("wavenumber", 2 * np.pi * n), dtype=float)
        r_p, r_s = plane_wave_eigenvectors(material, n)
        c0 = p["alpha"] * (p.get("amp_p", 1.0) * r_p + p.get("amp_s", 1.0) * r_s)

        def profile(x):
            return c0 * np.sin(np.asarray(x) @ k)[..., None]
        return profile
    if spec.kind == "plane_wave_cavity":
        # x-traveling p-wave of the cavity test
        r_p, _ = plane_wave_eigenvectors(material, (1.0, 0.0))

        def profile(x):
            return p["alpha"] * r_p * np.sin(2 * np.pi * np.asarray(x)[..., 0])[..., None]
        return profile
    return None


def scenario_sources(spec):
    p = spec.params
    if spec.kind in ("lamb_tilted", "layered_complex"):
        theta = np.deg2rad(p["tilt_angle_deg"])
        wl = RickerWavelet(**p["ricker"])
        return [PointSource(tuple(p["source_position"]),
                            (-np.sin(theta), np.cos(theta)), wl)]
    if spec.kind == "custom" and "point_sources" in p:
        out = []
        for s in p["point_sources"]:
            out.append(PointSource(tuple(s["position"]), tuple(s["direction"]),
                                   RickerWavelet(**s.get("ricker", {}))))
        return out
    return []


def init_state(spec, ops, matfield):
    """L2-projected initial state for a scenario (zero for source-driven ones)."""
    st = zero_state(ops)
    mats = list(matfield.materials.values())
    profile = scenario_initial_profile(spec, mats[0])
    if profile is None:
        return st
    st.v = project_velocity(ops, lambda x: profile(x)[..., 3:])
    st.sigma = project_stress(ops, lambda x: profile(x)[..., :3])
    return st


def exact_solution(spec, material):
    """Exact field evaluator (x, t) -> (...,5); plane-wave scenarios only."""
    if spec.kind not in ("ps_convergence", "sliver_study"):
        raise ScenarioError(f"no analytic solution for scenario {spec.kind!r}")
    p = spec.params
    n = np.asarray(p["direction"], dtype=float)
    k = np.asarray(p.get("wavenumber", 2 * np.pi * n), dtype=float)
    r_p, r_s = plane_wave_eigenvectors(material, n)
    c0 = p["alpha"] * (p.get("amp_p", 1.0) * r_p + p.get("amp_s", 1.0) * r_s)
    return PlaneWaveSolution(material, k, c0)


def compute_l2_error(op, state, exact, t):
    """Per-component L2 errors (u, v, sxx, syy, sxy) at the slice-end trace."""
    ops = op.ops
    g1 = ops.time.g1
    vtr = state.v @ g1
    str_tr = state.sigma @ g1
    pts = ops.elem.physical_points()
    vals = np.einsum("qk,mck->mqc", ops.elem.phi_vol, vtr)
    wq = ops.elem.vol_rule.weights[None, :, None] * (2 * ops.mesh.areas)[:, None, None]
    ex = exact(pts, t)
    err_v = np.sqrt((((vals - ex[..., 3:]) ** 2) * wq).sum(axis=(0, 1)))
    svals = np.einsum("csqm,cam->csqa", ops.cells.psi_vol, str_tr)
    exs = exact(ops.cells.vol_pts, t)[..., :3]
    w = ops.cells.vol_w[..., None]
    err_s = np.sqrt((((svals - exs) ** 2) * w).sum(axis=(0, 1, 2)))
    return np.concatenate([err_v, err_s])
