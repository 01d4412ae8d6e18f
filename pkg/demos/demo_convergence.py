#!/usr/bin/env python3
"""Mesh-refinement study on the periodic plane-wave problem.

A p- and an s-wave are superposed on [-1.5,1.5]^2 with periodic boundaries;
after t_end = 3*sqrt(2) every mode has crossed the box an integer number of
times, so the exact solution equals the initial one and the L2 error is
directly measurable.  The script runs two (optionally three) refinements for
each polynomial degree and prints the observed orders; expect roughly p+1,
with superconvergence of the stress components toward p+2 at p=2.

This is the small, fast version (a few hundred triangles; a minute or two).
Pass --full for the acceptance-sized study used in tests/test_acceptance.py.
"""

import argparse
import os

import numpy as np

from stagdg import driver
from stagdg.config import OutputConfig, RunConfig
from stagdg.material import IsotropicMaterial
from stagdg.mesh import PeriodicBox, PrimalMesh, write_native_mesh
from stagdg.scenarios import ps_convergence_spec


def diagonal_mesh(nx, lo=-1.5, hi=1.5):
    xs = np.linspace(lo, hi, nx + 1)
    nodes = [(x, y) for y in xs for x in xs]

    def nid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(nx):
        for i in range(nx):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            tris += [(a, b, d), (b, c, d)]
    return PrimalMesh(nodes, tris, periodic_box=PeriodicBox(lo, hi, lo, hi))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--full", action="store_true",
                    help="acceptance-sized meshes (450 and 1800 triangles)")
    ap.add_argument("--degrees", default="1,2")
    args = ap.parse_args()

    sizes = (15, 30) if args.full else (8, 16)
    os.makedirs("demo_out/convergence", exist_ok=True)
    mesh_paths = []
    for nx in sizes:
        path = f"demo_out/convergence/mesh_{nx:02d}.txt"
        write_native_mesh(path, diagonal_mesh(nx))
        mesh_paths.append(path)

    for p in [int(v) for v in args.degrees.split(",")]:
        print(f"\n=== degree p = p_gamma = {p} ===")
        cfg = RunConfig(
            mesh=mesh_paths[0], p=p, p_gamma=p, mode="spacetime",
            dt_factor=0.112, t_end=3 * np.sqrt(2),
            materials={0: IsotropicMaterial(2.0, 1.0, 1.0)},
            bc="periodic", preconditioner="pre1",
            scenario=ps_convergence_spec(),
            output=OutputConfig(directory=f"demo_out/convergence/p{p}"),
        )
        driver.convergence(cfg, mesh_paths)
        print(f"table written to demo_out/convergence/p{p}/convergence.csv")


if __name__ == "__main__":
    main()
