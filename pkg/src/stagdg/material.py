"""Isotropic elastic media: Lame parameters, the 2D Voigt stiffness matrix and
its inverse, wave speeds, strain energy density, and piecewise-constant
material fields on the staggered mesh.

Voigt convention: stress sigma~ = (sxx, syy, sxy), strain eps~ = (exx, eyy, exy)
with the plain (undoubled) shear component, so the stiffness carries 2*mu in
the shear slot and sigma~ = E~ eps~.
"""

from dataclasses import dataclass

import numpy as np


class MaterialError(Exception):
    pass


@dataclass(frozen=True)
class IsotropicMaterial:
    lam: float
    mu: float
    rho: float

    def __post_init__(self):
        if not (self.mu > 0 and self.rho > 0 and self.lam + self.mu > 0):
            raise MaterialError(
                f"inadmissible material (lam={self.lam}, mu={self.mu}, "
                f"rho={self.rho}): need mu>0, rho>0, lam+mu>0")

    @classmethod
    def from_speeds(cls, cp, cs, rho):
        mu = rho * cs ** 2
        lam = rho * (cp ** 2 - 2 * cs ** 2)
        return cls(lam, mu, rho)


def wave_speeds(m):
    """(c_p, c_s) = (sqrt((lam+2mu)/rho), sqrt(mu/rho))."""
    return np.sqrt((m.lam + 2 * m.mu) / m.rho), np.sqrt(m.mu / m.rho)


class Stiffness2D:
    """Plane-strain 3x3 Voigt stiffness and its closed-form inverse."""

    def __init__(self, E):
        self.E = np.asarray(E, dtype=float)
        if self.E.shape != (3, 3) or not np.allclose(self.E, self.E.T, atol=0):
            raise MaterialError("stiffness must be a symmetric 3x3 matrix")
        try:
            self.Einv = np.linalg.inv(self.E)
        except np.linalg.LinAlgError:
            raise MaterialError("singular stiffness matrix")
        if np.linalg.eigvalsh(self.E)[0] <= 0:
            raise MaterialError("stiffness matrix is not positive definite")


def stiffness_from_lame(m):
    """E~ = [[lam+2mu, lam, 0], [lam, lam+2mu, 0], [0, 0, 2mu]]."""
    lam, mu = m.lam, m.mu
    E = np.array([[lam + 2 * mu, lam, 0.0],
                  [lam, lam + 2 * mu, 0.0],
                  [0.0, 0.0, 2 * mu]])
    return Stiffness2D(E)


def strain_energy_density(sigma, stiff):
    """sigma : E^-1 sigma, restoring the tensor double contraction from Voigt."""
    sigma = np.asarray(sigma, dtype=float)
    eps = stiff.Einv @ sigma
    return sigma[0] * eps[0] + sigma[1] * eps[1] + 2.0 * sigma[2] * eps[2]


# Voigt index of the tensor pair (i, j)
_VOIGT = np.array([[0, 2], [2, 1]])


def voigt_to_tensor4(E):
    """Rank-4 tensor E_ijkl from the Voigt matrix (stiffness convention)."""
    E = np.asarray(E, dtype=float)
    T = np.empty((2, 2, 2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    T[i, j, k, l] = E[_VOIGT[i, j], _VOIGT[k, l]] * (1.0 if k == l else 0.5)
    return T


class MaterialField:
    """Per-element density and per-dual-cell stiffness from region tags.

    A dual cell straddling two regions takes the material of the lower
    region_id (deterministic interface rule).
    """

    def __init__(self, mesh, dual, materials):
        self.materials = dict(materials)
        missing = set(mesh.region_id.tolist()) - set(self.materials)
        if missing:
            raise MaterialError(f"no material for region ids {sorted(missing)}")
        self.rho = np.array([self.materials[r].rho for r in mesh.region_id])
        self.cell_region = np.empty(dual.n_cells, dtype=int)
        for c, cell in enumerate(dual.cells):
            rl = mesh.region_id[cell.left]
            if cell.right >= 0:
                rr = mesh.region_id[cell.right]
                self.cell_region[c] = min(rl, rr)
            else:
                self.cell_region[c] = rl
        stiff = {r: stiffness_from_lame(m) for r, m in self.materials.items()}
        self.E = np.stack([stiff[r].E for r in self.cell_region])
        self.Einv = np.stack([stiff[r].Einv for r in self.cell_region])

    def max_cp(self):
        return max(wave_speeds(m)[0] for m in self.materials.values())

    def is_homogeneous(self):
        mats = list(self.materials.values())
        return all(m == mats[0] for m in mats[1:])
