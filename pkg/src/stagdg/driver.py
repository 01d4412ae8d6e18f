"""Execution driver: the time loop behind `stagdg run`, the convergence study
behind `stagdg convergence`, and the sliver preconditioner study behind
`stagdg slivers`.
"""

import os
import time

import numpy as np

from .assembly import assemble_operators, assemble_sources, SourceVectors
from .basis import SpaceTimeBasis
from .config import ConfigError
from .material import MaterialField
from .mesh import build_connectivity, build_dual, read_mesh
from .output import (ReceiverSampler, write_convergence_csv, write_energy_csv,
                     write_seismogram_csv, write_sliver_csv,
                     write_statistics_csv, write_vtk)
from .scenarios import (compute_l2_error, exact_solution, init_state,
                        make_sliver_meshes, scenario_sources)
from .scheme import (EnergyMonitor, SchurOperator, advance_slice, apply_bc,
                     slice_jump_energy)
from .solver import KrylovConfig, build_pre1, build_pre2

_ZERO_SOURCES = SourceVectors(None, None)


class Problem:
    """Everything needed to march one configuration on one mesh."""

    def __init__(self, cfg, mesh=None, dt=None):
        self.cfg = cfg
        self.mesh = mesh if mesh is not None else read_mesh(cfg.mesh)
        self.conn = build_connectivity(self.mesh)
        if cfg.bc == "periodic":
            unpaired = [j for j in self.conn.boundary_set]
            if unpaired:
                raise ConfigError(
                    f"bc 'periodic' but {len(unpaired)} boundary edges are "
                    "unpaired; add a PERIODIC BOX line to the mesh")
        self.dual = build_dual(self.mesh, self.conn)
        self.basis = SpaceTimeBasis(cfg.p, cfg.p_gamma)
        self.ops = assemble_operators(self.mesh, self.conn, self.dual, self.basis)
        apply_bc(self.ops, cfg.bc)
        self.matfield = MaterialField(self.mesh, self.dual, cfg.materials)
        if dt is None:
            dt = cfg.dt if cfg.dt > 0 else cfg.dt_factor * self.mesh.median_edge_length()
        self.dt = dt
        self.op = SchurOperator(self.ops, self.matfield, cfg.mode, dt)
        self.sources = scenario_sources(cfg.scenario)
        self.state = init_state(cfg.scenario, self.ops, self.matfield)
        self.precond = self._build_precond(cfg.preconditioner)
        self.solver_cfg = self._solver_cfg(cfg)

    def _build_precond(self, name):
        if name == "none":
            return None
        if name == "pre1":
            return build_pre1(self.op)
        if name == "pre2":
            return build_pre2(self.op)
        raise ConfigError(f"unknown preconditioner {name!r}")

    def _solver_cfg(self, cfg):
        s = cfg.solver
        method = s.method
        if method == "auto":
            method = "cg" if self.basis.n_gamma == 1 else "gmres"
        return KrylovConfig(method=method, rtol=s.rtol, atol=s.atol,
                            maxiter=s.maxiter, restart=s.restart)

    def slab_sources(self, t):
        if not self.sources:
            return _ZERO_SOURCES
        return assemble_sources(self.sources, self.ops, self.matfield, t, self.dt)

    def step(self):
        sv = self.slab_sources(self.state.t)
        new_state, info = advance_slice(self.op, self.state, sv,
                                        self.solver_cfg, self.precond)
        old = self.state
        self.state = new_state
        return old, info


def run(cfg, output_dir=None):
    """Execute the time loop and write all output artifacts."""
    cfg.validate()
    out = output_dir or cfg.output.directory
    os.makedirs(out, exist_ok=True)
    t0 = time.time()
    prob = Problem(cfg)
    nsteps = int(np.floor(cfg.t_end / prob.dt + 1e-9))
    if nsteps < 1:
        raise ConfigError("t_end shorter than one time step")

    monitor = EnergyMonitor(prob.op)
    sampler = ReceiverSampler(prob.ops, cfg.receivers) if cfg.receivers else None
    monitor.record(prob.state)
    if sampler:
        sampler.sample(prob.state)
    dump_every = cfg.output.field_dump_every
    if dump_every > 0:
        write_vtk(os.path.join(out, "fields_000000.vtk"), prob.ops, prob.state,
                  cfg.output.sample_level)

    iters = []
    for _ in range(nsteps):
        old, info = prob.step()
        jumps = slice_jump_energy(prob.op, old, prob.state)
        monitor.record(prob.state, info["iterations"], info["residual"], jumps)
        iters.append(info["iterations"])
        if sampler:
            sampler.sample(prob.state)
        if dump_every > 0 and (prob.state.n % dump_every == 0
                               or prob.state.n == nsteps):
            write_vtk(os.path.join(out, f"fields_{prob.state.n:06d}.vtk"),
                      prob.ops, prob.state, cfg.output.sample_level)

    write_energy_csv(os.path.join(out, "energy.csv"), monitor.records)
    write_statistics_csv(os.path.join(out, "statistics.csv"),
                         monitor.records[1:])
    if sampler:
        for rid, rows in sampler.rows.items():
            write_seismogram_csv(os.path.join(out, f"seismogram_{rid}.csv"), rows)
    wall = time.time() - t0
    summary = {
        "steps": nsteps,
        "mean_iterations": float(np.mean(iters)) if iters else 0.0,
        "wall_time": wall,
        "final_energy": monitor.records[-1]["total"],
        "output_dir": out,
    }
    print(f"steps={nsteps} mean_iterations={summary['mean_iterations']:.2f} "
          f"wall={wall:.2f}s energy={summary['final_energy']:.6e}")
    return summary


def convergence(cfg, mesh_paths, output_dir=None):
    """L2 errors, observed orders and wall times over a mesh sequence."""
    cfg.validate()
    if cfg.scenario.kind != "ps_convergence":
        raise ConfigError("convergence study requires the ps_convergence scenario")
    if len(mesh_paths) < 2:
        raise ConfigError("need at least two meshes")
    out = output_dir or cfg.output.directory
    os.makedirs(out, exist_ok=True)
    mats = list(cfg.materials.values())
    exact = exact_solution(cfg.scenario, mats[0])
    K = cfg.dt_factor if cfg.dt_factor > 0 else 0.112
    rows = []
    for path in mesh_paths:
        t0 = time.time()
        mesh = read_mesh(path)
        h = mesh.median_edge_length()
        nsteps = int(np.ceil(cfg.t_end / (K * h)))
        dt = cfg.t_end / nsteps
        prob = Problem(cfg, mesh=mesh, dt=dt)
        for _ in range(nsteps):
            prob.step()
        errs = compute_l2_error(prob.op, prob.state, exact, cfg.t_end)
        rows.append({"mesh": os.path.basename(path),
                     "n_triangles": mesh.n_triangles, "h": h,
                     "errors": errs, "orders": np.full(5, np.nan),
                     "wall_time": time.time() - t0})
    for k in range(1, len(rows)):
        h1, h2 = rows[k - 1]["h"], rows[k]["h"]
        if abs(h1 - h2) < 1e-14 * h1:
            print(f"warning: meshes {k-1} and {k} have identical h; "
                  "order undefined (NaN)")
            continue
        rows[k]["orders"] = (np.log(rows[k - 1]["errors"] / rows[k]["errors"])
                             / np.log(h1 / h2))
    path = os.path.join(out, "convergence.csv")
    write_convergence_csv(path, rows)
    _print_convergence_table(rows)
    return rows


def _print_convergence_table(rows):
    comp = ("u", "v", "sxx", "syy", "sxy")
    head = f"{'mesh':>16} {'N':>6} {'h':>9}" + "".join(
        f" {f'err_{c}':>10} {f'ord_{c}':>7}" for c in comp) + f" {'T[s]':>8}"
    print(head)
    for r in rows:
        line = f"{r['mesh']:>16} {r['n_triangles']:>6} {r['h']:>9.4f}"
        for e, o in zip(r["errors"], r["orders"]):
            line += f" {e:>10.3e} " + (f"{o:>7.2f}" if np.isfinite(o) else
                                       f"{'-':>7}")
        line += f" {r['wall_time']:>8.1f}"
        print(line)


def sliver_study(cfg, output_dir=None, n=12, target_ratio=70.0, steps=6):
    """Mean GMRES iterations on a regular mesh vs one with sliver elements,
    for each preconditioner variant."""
    cfg.validate()
    out = output_dir or cfg.output.directory
    os.makedirs(out, exist_ok=True)
    mesh1, mesh2 = make_sliver_meshes(n=n, target_ratio=target_ratio)
    rows = []
    means = {}
    for name, mesh in (("mesh1", mesh1), ("mesh2", mesh2)):
        for pre in ("none", "pre1", "pre2"):
            cfg_k = _with_precond(cfg, pre)
            prob = Problem(cfg_k, mesh=mesh)
            nsteps = steps
            its = []
            for _ in range(nsteps):
                _, info = prob.step()
                its.append(info["iterations"])
            means[(name, pre)] = float(np.mean(its))
            rows.append({"mesh": name, "preconditioner": pre,
                         "mean_iterations": means[(name, pre)]})
            print(f"{name} {pre:>5}: mean iterations {means[(name, pre)]:.2f}")
    for pre in ("none", "pre1", "pre2"):
        ratio = means[("mesh2", pre)] / means[("mesh1", pre)]
        print(f"{pre:>5}: mesh2/mesh1 iteration ratio {ratio:.2f}")
    write_sliver_csv(os.path.join(out, "sliver_iterations.csv"), rows)
    return rows, means


def _with_precond(cfg, name):
    import copy
    c = copy.copy(cfg)
    c.preconditioner = name
    return c
