"""Nodal bases on the reference triangle/square, the Gauss-Legendre time basis,
and quadrature rules.

The primal (triangle) basis is nodal Lagrange on equispaced points, represented
internally in an orthonormal modal basis for conditioning.  The dual (square)
basis is a tensor product of 1D equispaced Lagrange polynomials.  The temporal
basis is Lagrange through the Gauss-Legendre points of [0, 1], which makes it
orthogonal with the quadrature weights as norms.
"""

import numpy as np
from scipy.special import eval_jacobi, gammaln

MAX_SPATIAL_DEGREE = 6
MAX_TIME_DEGREE = 4
MAX_QUAD_EXACTNESS = 20


# ---------------------------------------------------------------------------
# 1D Gauss rules on [0, 1]

def gauss_legendre_01(n):
    """n-point Gauss-Legendre rule on [0,1]; exact for degree 2n-1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_jacobi_01(n, alpha):
    """n-point Gauss-Jacobi rule on [0,1] with weight (1-x)^alpha."""
    from scipy.special import roots_jacobi

    x, w = roots_jacobi(n, alpha, 0.0)
    # map [-1,1] -> [0,1]; weight (1-t)^a dt = (1-x)^a 2^a * dx/ ... absorb scale
    return 0.5 * (x + 1.0), w / 2.0 ** (alpha + 1)


# ---------------------------------------------------------------------------
# Quadrature rules

class QuadratureRule:
    """Points and weights exact for polynomials up to ``exactness``.

    kind is one of 'triangle' (unit triangle T_std), 'square' ([0,1]^2),
    'interval' ([0,1]).
    """

    def __init__(self, kind, exactness, points, weights):
        self.kind = kind
        self.exactness = exactness
        self.points = np.asarray(points, dtype=float)
        self.weights = np.asarray(weights, dtype=float)

    @property
    def npoints(self):
        return len(self.weights)


def make_quadrature(kind, exactness):
    """Build a quadrature rule on a reference domain.

    Triangle rules are collapsed Gauss-Legendre x Gauss-Jacobi products, so all
    weights are positive and the declared exactness is met for any degree up
    to MAX_QUAD_EXACTNESS.
    """
    if not 0 <= exactness <= MAX_QUAD_EXACTNESS:
        raise ValueError(f"unsupported quadrature exactness {exactness}")
    n = exactness // 2 + 1
    if kind == "interval":
        x, w = gauss_legendre_01(n)
        return QuadratureRule(kind, exactness, x, w)
    if kind == "square":
        x, w = gauss_legendre_01(n)
        X, Y = np.meshgrid(x, x, indexing="ij")
        W = np.outer(w, w)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        return QuadratureRule(kind, exactness, pts, W.ravel())
    if kind == "triangle":
        # Duffy: (xi, eta) = (a*(1-b), b), d(xi,eta) = (1-b) da db
        a, wa = gauss_legendre_01(n)
        b, wb = gauss_jacobi_01(n, 1.0)
        A, B = np.meshgrid(a, b, indexing="ij")
        W = np.outer(wa, wb)
        pts = np.column_stack([(A * (1.0 - B)).ravel(), B.ravel()])
        return QuadratureRule(kind, exactness, pts, W.ravel())
    raise ValueError(f"unknown quadrature kind {kind!r}")


def map_rule_to_triangle(rule, verts):
    """Affine image of a reference-triangle rule on the physical triangle."""
    verts = np.asarray(verts, dtype=float)
    J = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
    detJ = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    pts = verts[0] + rule.points @ J.T
    return pts, rule.weights * abs(detJ)


def map_rule_to_segment(rule, p0, p1):
    """Image of a [0,1] rule on the segment p0-p1, weights carry the length."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    t = rule.points.reshape(-1, 1)
    pts = (1.0 - t) * p0 + t * p1
    return pts, rule.weights * np.linalg.norm(p1 - p0)


# ---------------------------------------------------------------------------
# Orthonormal modal basis on the triangle (used only to condition the nodal
# Vandermonde; all public evaluators are nodal)

def _jacobi_norm(n, a, b):
    num = gammaln(n + a + 1) + gammaln(n + b + 1)
    den = gammaln(n + a + b + 1) + gammaln(n + 1)
    return np.sqrt(2.0 ** (a + b + 1) / (2 * n + a + b + 1) * np.exp(num - den))


def _njacobi(x, n, a, b):
    return eval_jacobi(n, a, b, x) / _jacobi_norm(n, a, b)


def _dnjacobi(x, n, a, b):
    if n == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return np.sqrt(n * (n + a + b + 1)) * _njacobi(x, n - 1, a + 1, b + 1)


def _collapse(r, s):
    a = np.where(np.abs(1.0 - s) > 1e-14, 2.0 * (1.0 + r) / (1.0 - s + 1e-300) - 1.0, -1.0)
    return a, s


def _simplex_modal(xi, i, j):
    """Orthonormal modal function (i,j) and its T_std gradient at points xi."""
    r = 2.0 * xi[:, 0] - 1.0
    s = 2.0 * xi[:, 1] - 1.0
    a, b = _collapse(r, s)
    fa, dfa = _njacobi(a, i, 0, 0), _dnjacobi(a, i, 0, 0)
    gb, dgb = _njacobi(b, j, 2 * i + 1, 0), _dnjacobi(b, j, 2 * i + 1, 0)
    half1mb = 0.5 * (1.0 - b)
    val = np.sqrt(2.0) * fa * gb * (1.0 - b) ** i

    pow_im1 = half1mb ** (i - 1) if i > 0 else np.zeros_like(b)
    dmodedr = dfa * gb
    dmodeds = dfa * (gb * 0.5 * (1.0 + a))
    if i > 0:
        dmodedr = dmodedr * pow_im1
        dmodeds = dmodeds * pow_im1
    tmp = dgb * half1mb ** i
    if i > 0:
        tmp = tmp - 0.5 * i * gb * pow_im1
    dmodeds = dmodeds + fa * tmp
    scale = 2.0 ** (i + 0.5)
    # chain rule T_std -> (-1,1) triangle contributes a factor 2 per direction
    return val, 2.0 * scale * dmodedr, 2.0 * scale * dmodeds


def triangle_nodes(p):
    """Equispaced nodes of T_std, (p+1)(p+2)/2 of them."""
    pts = [(a / p, b / p) for a in range(p + 1) for b in range(p + 1 - a)]
    return np.array(pts, dtype=float)


class SpatialBasisPrimal:
    """Nodal Lagrange basis of degree p on the unit triangle."""

    def __init__(self, p):
        if not 1 <= p <= MAX_SPATIAL_DEGREE:
            raise ValueError(f"primal basis degree {p} outside [1, {MAX_SPATIAL_DEGREE}]")
        self.p = p
        self.nodes = triangle_nodes(p)
        self.n = len(self.nodes)  # (p+1)(p+2)/2
        self.modes = [(i, j) for i in range(p + 1) for j in range(p + 1 - i)]
        V = np.empty((self.n, self.n))
        for m, (i, j) in enumerate(self.modes):
            V[:, m] = _simplex_modal(self.nodes, i, j)[0]
        self._coeff = np.linalg.inv(V)

    def eval(self, xi):
        """Values of all basis functions at points xi, shape (npts, n)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        P = np.empty((len(xi), self.n))
        for m, (i, j) in enumerate(self.modes):
            P[:, m] = _simplex_modal(xi, i, j)[0]
        return P @ self._coeff

    def grad(self, xi):
        """Reference gradients, shape (npts, n, 2)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        Pr = np.empty((len(xi), self.n))
        Ps = np.empty((len(xi), self.n))
        for m, (i, j) in enumerate(self.modes):
            _, dr, ds = _simplex_modal(xi, i, j)
            Pr[:, m] = dr
            Ps[:, m] = ds
        return np.stack([Pr @ self._coeff, Ps @ self._coeff], axis=-1)


# ---------------------------------------------------------------------------
# 1D Lagrange with barycentric evaluation

class Lagrange1D:
    def __init__(self, nodes):
        self.nodes = np.asarray(nodes, dtype=float)
        self.n = len(self.nodes)
        d = self.nodes[:, None] - self.nodes[None, :]
        np.fill_diagonal(d, 1.0)
        self.w = 1.0 / d.prod(axis=1)
        # differentiation matrix at the nodes
        D = np.zeros((self.n, self.n))
        for m in range(self.n):
            for i in range(self.n):
                if i != m:
                    D[m, i] = (self.w[i] / self.w[m]) / (self.nodes[m] - self.nodes[i])
            D[m, m] = -D[m].sum()
        self._D = D

    def eval(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = np.zeros((len(x), self.n))
        for q, xq in enumerate(x):
            hit = np.where(np.abs(xq - self.nodes) < 1e-13)[0]
            if hit.size:
                vals[q, hit[0]] = 1.0
            else:
                terms = self.w / (xq - self.nodes)
                vals[q] = terms / terms.sum()
        return vals

    def deriv(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((len(x), self.n))
        for q, xq in enumerate(x):
            hit = np.where(np.abs(xq - self.nodes) < 1e-13)[0]
            if hit.size:
                out[q] = self._D[hit[0]]
            else:
                terms = self.w / (xq - self.nodes)
                S = terms.sum()
                S2 = (self.w / (xq - self.nodes) ** 2).sum()
                ell = terms / S
                out[q] = ell * (S2 / S - 1.0 / (xq - self.nodes))
        return out


class SpatialBasisDual:
    """Tensor-product nodal basis of degree p on the unit square.

    Node k corresponds to (ix, iy) with ix fastest: k = iy*(p+1) + ix.
    """

    def __init__(self, p):
        if not 1 <= p <= MAX_SPATIAL_DEGREE:
            raise ValueError(f"dual basis degree {p} outside [1, {MAX_SPATIAL_DEGREE}]")
        self.p = p
        self._lag = Lagrange1D(np.linspace(0.0, 1.0, p + 1))
        self.n = (p + 1) ** 2
        g = self._lag.nodes
        self.nodes = np.array([(g[ix], g[iy]) for iy in range(p + 1) for ix in range(p + 1)])

    def eval(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        fx = self._lag.eval(xi[:, 0])
        fy = self._lag.eval(xi[:, 1])
        return (fy[:, :, None] * fx[:, None, :]).reshape(len(xi), self.n)

    def grad(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        fx, fy = self._lag.eval(xi[:, 0]), self._lag.eval(xi[:, 1])
        dfx, dfy = self._lag.deriv(xi[:, 0]), self._lag.deriv(xi[:, 1])
        gx = (fy[:, :, None] * dfx[:, None, :]).reshape(len(xi), self.n)
        gy = (dfy[:, :, None] * fx[:, None, :]).reshape(len(xi), self.n)
        return np.stack([gx, gy], axis=-1)


class TimeBasis:
    """Lagrange basis through the Gauss-Legendre points of [0,1].

    Orthogonal: int gamma_k gamma_m dtau = w_k delta_km.  For degree 0 the
    single function is the constant 1.
    """

    def __init__(self, p_gamma):
        if not 0 <= p_gamma <= MAX_TIME_DEGREE:
            raise ValueError(f"time basis degree {p_gamma} outside [0, {MAX_TIME_DEGREE}]")
        self.p = p_gamma
        self.n = p_gamma + 1
        self.nodes, self.weights = gauss_legendre_01(self.n)
        self._lag = Lagrange1D(self.nodes)
        self.at0 = self.eval(0.0)[0]
        self.at1 = self.eval(1.0)[0]

    def eval(self, tau):
        return self._lag.eval(tau)

    def deriv(self, tau):
        return self._lag.deriv(tau)


def make_primal_basis(p):
    return SpatialBasisPrimal(p)


def make_dual_basis(p):
    return SpatialBasisDual(p)


def make_time_basis(p_gamma):
    return TimeBasis(p_gamma)


class SpaceTimeBasis:
    """Bundle of the three bases used by one discretization."""

    def __init__(self, p, p_gamma):
        self.p = p
        self.p_gamma = p_gamma
        self.primal = make_primal_basis(p)
        self.dual = make_dual_basis(p)
        self.time = make_time_basis(p_gamma)

    @property
    def n_phi(self):
        return self.primal.n

    @property
    def n_psi(self):
        return self.dual.n

    @property
    def n_gamma(self):
        return self.time.n
