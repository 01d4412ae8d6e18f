import numpy as np
import pytest

from stagdg.assembly import SourceVectors, assemble_operators
from stagdg.basis import SpaceTimeBasis
from stagdg.material import IsotropicMaterial, MaterialField
from stagdg.mesh import PeriodicBox, PrimalMesh, build_connectivity, build_dual
from stagdg.scenarios import rect_mesh
from stagdg.scheme import SchurOperator

ZERO_SOURCES = SourceVectors(None, None)
MAT_211 = IsotropicMaterial(2.0, 1.0, 1.0)


def two_triangle_square(periodic=False):
    box = PeriodicBox(0, 1, 0, 1) if periodic else None
    return PrimalMesh([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1, 3), (1, 2, 3)],
                      periodic_box=box)


def build_operator(nx=4, p=2, p_gamma=0, mode="cn", dt=0.2, periodic=True,
                   material=MAT_211, lo=(-1.5, -1.5), hi=(1.5, 1.5), mesh=None):
    if mesh is None:
        mesh = rect_mesh(nx, nx, lo, hi, periodic=periodic)
    conn = build_connectivity(mesh)
    dual = build_dual(mesh, conn)
    basis = SpaceTimeBasis(p, p_gamma)
    ops = assemble_operators(mesh, conn, dual, basis)
    mf = MaterialField(mesh, dual, {r: material for r in set(mesh.region_id)})
    return SchurOperator(ops, mf, mode, dt)


def plane_wave_fields(alpha=0.1, amp_p=1.0, amp_s=1.0, n=(1.0, 1.0)):
    """(velocity_fn, stress_fn) of the combined p/s plane-wave profile."""
    lam, mu = MAT_211.lam, MAT_211.mu
    cp, cs = 2.0, 1.0
    nx, ny = n
    k = 2 * np.pi * np.asarray(n)
    rp = np.array([lam + 2 * mu * nx ** 2, lam + 2 * mu * ny ** 2,
                   2 * mu * nx * ny, -nx * cp, -ny * cp])
    rs = np.array([-2 * mu * nx * ny, 2 * mu * nx * ny, mu * (nx ** 2 - ny ** 2),
                   ny * cs, -nx * cs])
    c0 = alpha * (amp_p * rp + amp_s * rs)

    def vel(x):
        return c0[3:] * np.sin(np.asarray(x) @ k)[..., None]

    def sig(x):
        return c0[:3] * np.sin(np.asarray(x) @ k)[..., None]

    return vel, sig


@pytest.fixture(scope="session")
def cn_op_16():
    """CN operator on the 16-triangle fully periodic square, p=2."""
    return build_operator(nx=2, p=2, p_gamma=0, mode="cn", dt=0.25,
                          lo=(0, 0), hi=(1, 1))


@pytest.fixture(scope="session")
def st_op_64():
    """Space-time p=2, p_gamma=1 operator on a 64-triangle periodic mesh."""
    return build_operator(nx=4, p=2, p_gamma=1, mode="spacetime", dt=0.15,
                          periodic=True)
