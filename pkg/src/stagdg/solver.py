"""Matrix-free Krylov solvers and the two block preconditioners.

CG serves the symmetric Crank-Nicolson velocity system, unrestarted
left-preconditioned GMRES the general space-time case.  Both work on any
object exposing ``n`` and ``matvec``; preconditioners expose ``apply``.
"""

from dataclasses import dataclass

import numpy as np


class SolverError(Exception):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history if history is not None else []


class SolverDivergedError(SolverError):
    pass


class SolverConvergenceError(SolverError):
    pass


@dataclass
class KrylovConfig:
    method: str = "gmres"         # 'cg' | 'gmres' | 'auto'
    rtol: float = 1e-10
    atol: float = 1e-14
    maxiter: int = 1000
    restart: int = 0              # 0 = unrestarted

    def __post_init__(self):
        if not 0.0 < self.rtol < 1.0:
            raise ValueError(f"rtol must be in (0,1), got {self.rtol}")
        if self.maxiter < 1:
            raise ValueError("maxiter must be >= 1")


class IdentityPreconditioner:
    variant = "none"

    def apply(self, x):
        return x


class DenseOperator:
    """Thin wrapper so tests can feed explicit matrices to the solvers."""

    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)
        self.n = self.A.shape[0]

    def matvec(self, x):
        return self.A @ x


def _check_finite(r, history):
    if not np.isfinite(r):
        raise SolverDivergedError("NaN/Inf residual encountered", history)


def cg_solve(A, b, x0=None, cfg=None, precond=None):
    """Preconditioned conjugate gradients; returns (x, iterations, history)."""
    cfg = cfg or KrylovConfig(method="cg")
    P = precond or IdentityPreconditioner()
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A.matvec(x)
    z = P.apply(r)
    p = z.copy()
    rz = r @ z
    bnorm = np.linalg.norm(b)
    tol = max(cfg.rtol * bnorm, cfg.atol)
    history = [float(np.linalg.norm(r))]
    _check_finite(history[-1], history)
    if history[-1] <= tol:
        return x, 0, history
    for k in range(1, cfg.maxiter + 1):
        Ap = A.matvec(p)
        alpha = rz / (p @ Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rn = float(np.linalg.norm(r))
        history.append(rn)
        _check_finite(rn, history)
        if rn <= tol:
            return x, k, history
        z = P.apply(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverConvergenceError(
        f"CG did not converge in {cfg.maxiter} iterations "
        f"(residual {history[-1]:.3e}, target {tol:.3e})", history)


def gmres_solve(A, b, x0=None, cfg=None, precond=None):
    """Left-preconditioned GMRES with modified Gram-Schmidt and Givens
    rotations; unrestarted when cfg.restart == 0."""
    cfg = cfg or KrylovConfig(method="gmres")
    P = precond or IdentityPreconditioner()
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(P.apply(b))
    tol = max(cfg.rtol * bnorm, cfg.atol)
    m = cfg.restart if cfg.restart > 0 else cfg.maxiter
    history = []
    total_iters = 0

    while True:
        r = P.apply(b - A.matvec(x))
        beta = float(np.linalg.norm(r))
        if not history:
            history.append(beta)
        _check_finite(beta, history)
        if beta <= tol:
            return x, total_iters, history
        V = np.zeros((m + 1, len(b)))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        V[0] = r / beta
        g[0] = beta
        k_used = 0
        for k in range(m):
            if total_iters >= cfg.maxiter:
                break
            w = P.apply(A.matvec(V[k]))
            for i in range(k + 1):
                H[i, k] = w @ V[i]
                w = w - H[i, k] * V[i]
            H[k + 1, k] = np.linalg.norm(w)
            if H[k + 1, k] > 1e-300:
                V[k + 1] = w / H[k + 1, k]
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            total_iters += 1
            k_used = k + 1
            res = abs(g[k + 1])
            history.append(float(res))
            _check_finite(res, history)
            if res <= tol:
                break
        if k_used > 0:
            y = np.linalg.solve(H[:k_used, :k_used], g[:k_used])
            x = x + V[:k_used].T @ y
        r = P.apply(b - A.matvec(x))
        history[-1] = float(np.linalg.norm(r))
        if history[-1] <= tol * (1 + 1e-12):
            return x, total_iters, history
        if total_iters >= cfg.maxiter:
            raise SolverConvergenceError(
                f"GMRES did not converge in {cfg.maxiter} iterations "
                f"(residual {history[-1]:.3e}, target {tol:.3e})", history)
        if cfg.restart == 0:
            # unrestarted Krylov space exhausted without reaching tol
            raise SolverConvergenceError(
                f"GMRES stagnated after {total_iters} iterations "
                f"(residual {history[-1]:.3e}, target {tol:.3e})", history)


def solve(A, b, x0=None, cfg=None, precond=None):
    cfg = cfg or KrylovConfig()
    if cfg.method == "cg":
        return cg_solve(A, b, x0, cfg, precond)
    if cfg.method == "gmres":
        return gmres_solve(A, b, x0, cfg, precond)
    raise ValueError(f"unknown Krylov method {cfg.method!r}")


# ---------------------------------------------------------------------------
# Preconditioners (Pre1: inverted diagonal blocks; Pre2: first block-row of
# the inverted element+neighbors system)

class Pre1:
    variant = "pre1"

    def __init__(self, inv_blocks):
        self.inv_blocks = inv_blocks      # (M, nloc, nloc)

    def apply(self, x):
        M, nloc = self.inv_blocks.shape[:2]
        return np.einsum("mij,mj->mi", self.inv_blocks,
                         x.reshape(M, nloc)).reshape(-1)


class Pre2:
    variant = "pre2"

    def __init__(self, stencil_ids, stencil_mask, row_blocks):
        self.stencil_ids = stencil_ids    # (M, smax) global element ids
        self.stencil_mask = stencil_mask  # (M, smax) valid entries
        self.row_blocks = row_blocks      # (M, smax, nloc, nloc)

    def apply(self, x):
        M, smax, nloc = self.row_blocks.shape[:3]
        xb = x.reshape(M, nloc)
        gathered = xb[self.stencil_ids]                  # (M, smax, nloc)
        gathered = gathered * self.stencil_mask[..., None]
        return np.einsum("msij,msj->mi", self.row_blocks, gathered).reshape(-1)


def build_pre1(op):
    """Exact inverses of the per-element diagonal blocks."""
    M = op.n_elements
    nloc = op.block_size
    blocks = np.empty((M, nloc, nloc))
    for i in range(M):
        try:
            blocks[i] = np.linalg.inv(op.diag_block(i))
        except np.linalg.LinAlgError:
            raise SolverError(f"singular diagonal block for element {i}")
    return Pre1(blocks)


def build_pre2(op):
    """Per element, invert the local system over {element} + face neighbors
    and keep the first block-row of the inverse."""
    M = op.n_elements
    nloc = op.block_size
    stencils = [op.stencil(i) for i in range(M)]
    smax = max(len(s) for s in stencils)
    ids = np.zeros((M, smax), dtype=int)
    mask = np.zeros((M, smax))
    rows = np.zeros((M, smax, nloc, nloc))
    for i, sten in enumerate(stencils):
        A = op.local_system(sten)
        try:
            Ainv = np.linalg.inv(A)
        except np.linalg.LinAlgError:
            raise SolverError(f"singular local system for element {i}")
        for e, gid in enumerate(sten):
            ids[i, e] = gid
            mask[i, e] = 1.0
            rows[i, e] = Ainv[:nloc, e * nloc:(e + 1) * nloc]
    return Pre2(ids, mask, rows)
