"""Discrete operators of the staggered space-time scheme.

All space-time matrices factor into a spatial block and a small temporal
factor, because the nodal time basis is orthogonal at its own Gauss-Legendre
points:

* slab integrals (divergence/gradient blocks, slab mass) carry dt * diag(w);
* endpoint masses carry outer(gamma(1), gamma(1)) resp. outer(gamma(0), gamma(1));
* the d/dt mass carries K[b,d] = int gamma_b' gamma_d dtau (dt-free).

Only the spatial blocks depend on the mesh; they are assembled once per
(mesh, basis) and shared across time-step sizes and modes.
"""

from dataclasses import dataclass, field

import numpy as np

from .basis import make_quadrature
from .mesh import tri_inverse


class AssemblyError(Exception):
    pass


# ---------------------------------------------------------------------------
# Temporal factors

class TimeFactors:
    def __init__(self, time_basis):
        tb = time_basis
        self.n = tb.n
        self.w = tb.weights.copy()
        self.g0 = tb.at0.copy()
        self.g1 = tb.at1.copy()
        # K[b,d] = int gamma_b' gamma_d dtau, exact at the nodal GL rule
        D = tb.deriv(tb.nodes)             # D[q, b] = gamma_b'(tau_q)
        self.K = (tb.weights[:, None] * D).T.copy()
        self.B = np.outer(self.g1, self.g1) - self.K       # temporal part of M
        self.Bminus = np.outer(self.g0, self.g1)           # temporal part of M^-
        self.Binv = np.linalg.inv(self.B)


# ---------------------------------------------------------------------------
# Dual-cell charts.  The reference square is mapped onto each kite by the
# bilinear map of its four vertices; its inverse is a batched Newton solve.
# Kites next to sliver elements can lose convexity (a barycenter almost on the
# edge), where the bilinear chart degenerates; those cells fall back to an
# affine frame with axes along the two kite diagonals, which never degenerates
# because the barycenters always sit on opposite sides of the edge.

def _batched_quad_inverse(verts, x, maxiter=60, tol=1e-13):
    """verts (C,4,2), x (C,Q,2) -> bilinear reference coords (C,Q,2)."""
    v0, v1, v2, v3 = (verts[:, k, None, :] for k in range(4))
    scale = np.maximum(np.linalg.norm(verts[:, 2] - verts[:, 0], axis=1),
                       np.linalg.norm(verts[:, 3] - verts[:, 1], axis=1))
    scale = scale[:, None, None]
    xi = np.full_like(x, 0.5)
    for _ in range(maxiter):
        s = xi[..., 0:1]
        t = xi[..., 1:2]
        f = ((1 - s) * (1 - t) * v0 + s * (1 - t) * v1 + s * t * v2
             + (1 - s) * t * v3 - x)
        if np.abs(f / scale).max() < tol:
            return xi
        ds = (1 - t) * (v1 - v0) + t * (v2 - v3)
        dt = (1 - s) * (v3 - v0) + s * (v2 - v1)
        det = ds[..., 0] * dt[..., 1] - ds[..., 1] * dt[..., 0]
        d0 = (f[..., 0] * dt[..., 1] - f[..., 1] * dt[..., 0]) / det
        d1 = (ds[..., 0] * f[..., 1] - ds[..., 1] * f[..., 0]) / det
        xi = xi - np.stack([d0, d1], axis=-1)
    raise AssemblyError("bilinear map inversion did not converge")


class CellCharts:
    """Per-cell map between physical points and dual reference coordinates."""

    def __init__(self, dual, margin=1e-3):
        C = dual.n_cells
        self.quads = np.stack([c.quad for c in dual.cells])
        cross = np.empty((C, 4))
        for k in range(4):
            e1 = self.quads[:, (k + 1) % 4] - self.quads[:, k]
            e2 = self.quads[:, (k + 3) % 4] - self.quads[:, k]
            cross[:, k] = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self.bilinear = cross.min(axis=1) > margin * np.abs(cross).max(axis=1)
        self.origin = self.quads.mean(axis=1)
        frame = np.empty((C, 2, 2))
        frame[:, :, 0] = self.quads[:, 3] - self.quads[:, 1]   # A -> B
        frame[:, :, 1] = self.quads[:, 2] - self.quads[:, 0]   # bary_l -> bary_r
        self.frame_inv = np.linalg.inv(frame)

    def coords(self, rows, pts):
        """Chart coordinates of pts (len(rows), Q, 2) on the given cells."""
        xi = np.empty_like(pts)
        bil = self.bilinear[rows]
        if bil.any():
            xi[bil] = _batched_quad_inverse(self.quads[rows][bil], pts[bil])
        aff = ~bil
        if aff.any():
            r = rows[aff]
            xi[aff] = np.einsum("clr,cqr->cql", self.frame_inv[r],
                                pts[aff] - self.origin[r, None, :]) + 0.5
        return xi

    def coords_single(self, c, point):
        return self.coords(np.array([c]), np.asarray(point, dtype=float)
                           .reshape(1, 1, 2))[0, 0]


# ---------------------------------------------------------------------------
# Spatial operator assembly

class ElementOps:
    """Per-triangle geometry and the shared reference mass matrix."""

    def __init__(self, mesh, basis):
        p = basis.p
        self.mesh = mesh
        self.verts = mesh.nodes[mesh.triangles]            # (M, 3, 2)
        self.areas = mesh.areas
        J = np.stack([self.verts[:, 1] - self.verts[:, 0],
                      self.verts[:, 2] - self.verts[:, 0]], axis=-1)
        self.J = J
        self.Jinv = np.linalg.inv(J)
        rule = make_quadrature("triangle", 2 * p + 2)
        self.vol_rule = rule
        self.phi_vol = basis.primal.eval(rule.points)          # (Q, Nphi)
        self.grad_vol_ref = basis.primal.grad(rule.points)     # (Q, Nphi, 2)
        self.M_ref = np.einsum("q,qk,qm->km", rule.weights, self.phi_vol,
                               self.phi_vol)
        self.M_ref_inv = np.linalg.inv(self.M_ref)
        self.M_ref_inv = 0.5 * (self.M_ref_inv + self.M_ref_inv.T)

    def physical_points(self):
        """Volume-rule quadrature points mapped into every triangle, (M, Q, 2)."""
        return self.verts[:, 0][:, None, :] + np.einsum(
            "qr,mlr->mql", self.vol_rule.points, self.J)


class DualOps:
    """Per-dual-cell spatial mass and flux blocks plus quadrature caches."""

    def __init__(self, mesh, conn, dual, basis):
        p = basis.p
        n_phi, n_psi = basis.n_phi, basis.n_psi
        C = dual.n_cells
        tri_rule = make_quadrature("triangle", 2 * p + 2)
        seg_rule = make_quadrature("interval", 2 * p + 2)
        Qv, Qe = tri_rule.npoints, seg_rule.npoints

        self.ell = np.array([c.left for c in dual.cells])
        self.neigh = np.array([c.right if c.right >= 0 else c.left
                               for c in dual.cells])
        self.is_boundary = np.array([c.boundary for c in dual.cells])
        self.side_tri = np.stack([self.ell, self.neigh], axis=1)
        self.side_mask = np.stack([np.ones(C, bool), ~self.is_boundary], axis=1)

        self.D = np.zeros((C, 2, n_phi, n_psi, 2))
        self.Q = np.zeros((C, 2, n_psi, n_phi, 2))
        self.M = np.zeros((C, n_psi, n_psi))
        # caches for projection / error / sampling over dual cells
        self.vol_pts = np.zeros((C, 2, Qv, 2))      # unfolded frame
        self.vol_w = np.zeros((C, 2, Qv))
        self.psi_vol = np.zeros((C, 2, Qv, n_psi))
        self.sub_shift = np.zeros((C, 2, 2))

        self.charts = CellCharts(dual)
        normals = np.stack([c.normal for c in dual.cells])
        self.normals = normals

        # ---- edge quadrature, both sides share the canonical segment A-B
        A = np.stack([c.A for c in dual.cells])
        B = np.stack([c.B for c in dual.cells])
        t = seg_rule.points
        edge_pts = A[:, None, :] * (1 - t)[None, :, None] + B[:, None, :] * t[None, :, None]
        edge_w = seg_rule.weights[None, :] * np.linalg.norm(B - A, axis=1)[:, None]
        xi_edge = self.charts.coords(np.arange(C), edge_pts)
        psi_edge = basis.dual.eval(xi_edge.reshape(-1, 2)).reshape(C, Qe, n_psi)

        # ---- per-side volume quadrature and assembled blocks
        elem_J = np.stack([mesh.nodes[mesh.triangles[:, 1]] - mesh.nodes[mesh.triangles[:, 0]],
                           mesh.nodes[mesh.triangles[:, 2]] - mesh.nodes[mesh.triangles[:, 0]]],
                          axis=-1)
        elem_Jinv = np.linalg.inv(elem_J)
        elem_v0 = mesh.nodes[mesh.triangles[:, 0]]

        for side in range(2):
            rows = [c for c in range(C) if self.side_mask[c, side]]
            if not rows:
                continue
            rows = np.array(rows)
            tris = self.side_tri[rows, side]
            sub_verts = np.stack([dual.cells[c].sub_tris[side][1] for c in rows])
            shifts = np.stack([dual.cells[c].sub_shifts[side] for c in rows])
            signs = np.array([dual.cells[c].sub_signs[side] for c in rows])
            self.sub_shift[rows, side] = shifts

            # volume points in the own frame (affine image of the ref rule)
            Jsub = np.stack([sub_verts[:, 1] - sub_verts[:, 0],
                             sub_verts[:, 2] - sub_verts[:, 0]], axis=-1)
            detJ = np.abs(Jsub[:, 0, 0] * Jsub[:, 1, 1] - Jsub[:, 0, 1] * Jsub[:, 1, 0])
            pts_own = (sub_verts[:, None, 0, :]
                       + np.einsum("qr,crl->cql", tri_rule.points,
                                   np.swapaxes(Jsub, 1, 2)))
            w = tri_rule.weights[None, :] * detJ[:, None]
            pts_unf = pts_own + shifts[:, None, :]
            xi_q = self.charts.coords(rows, pts_unf)
            psi_v = basis.dual.eval(xi_q.reshape(-1, 2)).reshape(len(rows), Qv, n_psi)

            # primal basis on the owning triangle
            xi_tri = np.einsum("clr,cqr->cql", elem_Jinv[tris],
                               pts_own - elem_v0[tris, None, :])
            phi_v = basis.primal.eval(xi_tri.reshape(-1, 2)).reshape(len(rows), Qv, n_phi)
            grad_ref = basis.primal.grad(xi_tri.reshape(-1, 2)).reshape(
                len(rows), Qv, n_phi, 2)
            grad_phys = np.einsum("cqkr,crl->cqkl", grad_ref, elem_Jinv[tris])

            # edge values of phi on this side (own-frame copy of the segment)
            edge_own = edge_pts[rows] - shifts[:, None, :]
            xi_tri_e = np.einsum("clr,cqr->cql", elem_Jinv[tris],
                                 edge_own - elem_v0[tris, None, :])
            phi_e = basis.primal.eval(xi_tri_e.reshape(-1, 2)).reshape(
                len(rows), Qe, n_phi)

            n_ij = signs[:, None] * normals[rows]          # (rows, 2)
            we = edge_w[rows]
            boundary_rows = self.is_boundary[rows]

            D_edge = np.einsum("cq,cqk,cqm,cl->ckml", we, phi_e, psi_edge[rows],
                               n_ij)
            D_vol = np.einsum("cq,cqkl,cqm->ckml", w, grad_phys, psi_v)
            Q_vol = np.einsum("cq,cqm,cqkl->cmkl", w, psi_v, grad_phys)
            Q_edge = np.einsum("cq,cqm,cqk,cl->cmkl", we, psi_edge[rows], phi_e,
                               signs[:, None] * normals[rows])
            D_full = D_edge - D_vol
            Q_full = Q_vol - Q_edge
            # free surface: traction zeroed in the momentum edge term, zero
            # velocity jump in the stress edge term
            D_full[boundary_rows] = -D_vol[boundary_rows]
            Q_full[boundary_rows] = Q_vol[boundary_rows]
            self.D[rows, side] = D_full
            self.Q[rows, side] = Q_full

            self.M[rows] += np.einsum("cq,cqk,cqm->ckm", w, psi_v, psi_v)
            self.vol_pts[rows, side] = pts_unf
            self.vol_w[rows, side] = w
            self.psi_vol[rows, side] = psi_v

        self.Minv = np.linalg.inv(self.M)
        self.Minv = 0.5 * (self.Minv + np.swapaxes(self.Minv, 1, 2))


class SpatialOperators:
    """Everything assembled once per (mesh, basis): geometry-bound blocks."""

    def __init__(self, mesh, conn, dual, basis):
        self.mesh = mesh
        self.conn = conn
        self.dual = dual
        self.basis = basis
        self.time = TimeFactors(basis.time)
        self.elem = ElementOps(mesh, basis)
        self.cells = DualOps(mesh, conn, dual, basis)

    @property
    def n_phi_st(self):
        return self.basis.n_phi * self.basis.n_gamma

    @property
    def n_psi_st(self):
        return self.basis.n_psi * self.basis.n_gamma


def assemble_operators(mesh, conn, dual, basis):
    return SpatialOperators(mesh, conn, dual, basis)


# ---------------------------------------------------------------------------
# Materialized space-time matrices (used by tests and the
# preconditioners; the hot paths use the factored forms)

class MassMatrices:
    """Materialized space-time mass blocks M_j^{+,-,o}, Mbar_i^{+,-,o}."""

    def __init__(self, ops, dt):
        self.ops = ops
        self.dt = dt
        t = ops.time
        self._T_plus = np.outer(t.g1, t.g1)
        self._T_minus = np.outer(t.g0, t.g1)
        self._T_circ = t.K

    def M_bar_plus(self, i):
        return np.kron(2 * self.ops.elem.areas[i] * self.ops.elem.M_ref, self._T_plus)

    def M_bar_minus(self, i):
        return np.kron(2 * self.ops.elem.areas[i] * self.ops.elem.M_ref, self._T_minus)

    def M_bar_circ(self, i):
        return np.kron(2 * self.ops.elem.areas[i] * self.ops.elem.M_ref, self._T_circ)

    def M_bar(self, i):
        return self.M_bar_plus(i) - self.M_bar_circ(i)

    def M_plus(self, c):
        return np.kron(self.ops.cells.M[c], self._T_plus)

    def M_minus(self, c):
        return np.kron(self.ops.cells.M[c], self._T_minus)

    def M_circ(self, c):
        return np.kron(self.ops.cells.M[c], self._T_circ)

    def M(self, c):
        return self.M_plus(c) - self.M_circ(c)

    def M_inv(self, c):
        return np.kron(self.ops.cells.Minv[c], self.ops.time.Binv)


class FluxOperators:
    """Materialized space-time divergence/gradient blocks per (cell, side)."""

    def __init__(self, ops, dt):
        self.ops = ops
        self.dt = dt
        self._T = dt * np.diag(ops.time.w)

    def D_st(self, c, side):
        """(N_phi*N_gamma, N_psi*N_gamma, 2) divergence block."""
        D = self.ops.cells.D[c, side]
        return np.stack([np.kron(D[..., l], self._T) for l in range(2)], axis=-1)

    def Q_st(self, c, side):
        Q = self.ops.cells.Q[c, side]
        return np.stack([np.kron(Q[..., l], self._T) for l in range(2)], axis=-1)


def assemble_mass(ops, dt):
    if dt <= 0:
        raise AssemblyError("time step must be positive")
    return MassMatrices(ops, dt)


def assemble_flux(ops, dt):
    if dt <= 0:
        raise AssemblyError("time step must be positive")
    return FluxOperators(ops, dt)


# ---------------------------------------------------------------------------
# Sources

@dataclass
class RickerWavelet:
    """S(t) = a1*(0.5 + a2*(t - t_D)^2) with a2 = -(pi f_c)^2."""
    a1: float = -2000.0
    f_c: float = 14.5
    t_D: float = 0.08

    @property
    def a2(self):
        return -(np.pi * self.f_c) ** 2

    def __call__(self, t):
        return self.a1 * (0.5 + self.a2 * (np.asarray(t, dtype=float) - self.t_D) ** 2)


@dataclass
class PointSource:
    """Directional momentum point source d * delta(x - x_s) * S(t)."""
    x: tuple
    direction: tuple
    wavelet: object = field(default_factory=RickerWavelet)


@dataclass
class MomentumVolumeSource:
    """Distributed velocity source S_v(x, t) -> (..., 2); weighted by rho_h."""
    fn: object


@dataclass
class StressVolumeSource:
    """Distributed stress source S_sigma(x, t) -> (..., 3)."""
    fn: object


def locate_point(mesh, x, tol=1e-10):
    """Element strictly containing x; error on boundaries (ambiguous owner)."""
    x = np.asarray(x, dtype=float)
    v = mesh.nodes[mesh.triangles]
    d = x[None, :] - v[:, 0]
    J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
    lam12 = np.linalg.solve(J, d[..., None])[..., 0]
    lam = np.column_stack([1 - lam12.sum(axis=1), lam12])
    inside = lam.min(axis=1)
    best = int(np.argmax(inside))
    if inside[best] < -tol:
        raise AssemblyError(f"point {x.tolist()} lies outside the mesh")
    if inside[best] < tol:
        raise AssemblyError(f"point {x.tolist()} lies on an element boundary; "
                            "relocate it strictly inside an element")
    return best


class SourceVectors:
    """Momentum moments (rho S)_i and stress moments S_j for one time slab."""

    def __init__(self, rho_s, s_j):
        self.rho_s = rho_s    # (M, 2, N_phi, N_gamma)
        self.s_j = s_j        # (C, 3, N_psi, N_gamma)

    @property
    def is_zero(self):
        return self.rho_s is None and self.s_j is None


_ZERO = SourceVectors(None, None)


def assemble_sources(sources, ops, matfield, t0, dt):
    """Space-time source moments over the slab [t0, t0+dt]."""
    if not sources:
        return _ZERO
    basis = ops.basis
    M = ops.mesh.n_triangles
    C = ops.dual.n_cells
    rho_s = np.zeros((M, 2, basis.n_phi, basis.n_gamma))
    s_j = np.zeros((C, 3, basis.n_psi, basis.n_gamma))
    tq = make_quadrature("interval", min(2 * basis.n_gamma + 7, 20))
    gam = basis.time.eval(tq.points)          # (Qt, N_gamma)

    for src in sources:
        if isinstance(src, PointSource):
            i = locate_point(ops.mesh, src.x)
            xi = tri_inverse(ops.elem.verts[i], np.asarray(src.x))
            phi = basis.primal.eval(xi)[0]
            Svals = np.asarray(src.wavelet(t0 + tq.points * dt), dtype=float)
            tmom = dt * np.einsum("q,q,qb->b", tq.weights, Svals, gam)
            rho_s[i] += np.einsum("c,k,b->ckb", np.asarray(src.direction, float),
                                  phi, tmom)
        elif isinstance(src, MomentumVolumeSource):
            pts = ops.elem.physical_points()                       # (M, Qv, 2)
            w = ops.elem.vol_rule.weights[None, :] * (2 * ops.mesh.areas)[:, None]
            for qt, (tauq, wq) in enumerate(zip(tq.points, tq.weights)):
                f = np.asarray(src.fn(pts, t0 + tauq * dt), dtype=float)
                rho_s += dt * wq * np.einsum(
                    "m,mq,mqc,qk,b->mckb", matfield.rho, w, f,
                    ops.elem.phi_vol, gam[qt])
        elif isinstance(src, StressVolumeSource):
            pts = ops.cells.vol_pts                                # (C, 2, Qv, 2)
            w = ops.cells.vol_w
            for qt, (tauq, wq) in enumerate(zip(tq.points, tq.weights)):
                f = np.asarray(src.fn(pts, t0 + tauq * dt), dtype=float)
                s_j += dt * wq * np.einsum("csq,csqa,csqk,b->cakb", w, f,
                                           ops.cells.psi_vol, gam[qt])
        else:
            raise AssemblyError(f"unknown source term {type(src).__name__}")
    return SourceVectors(rho_s, s_j)
