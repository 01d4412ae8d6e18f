"""Command-line driver.

    stagdg run <config.yaml>
    stagdg convergence <config.yaml> --meshes m1,m2[,...]
    stagdg slivers <config.yaml>

Global options: --output-dir PATH, --threads N, --reproducible.
"""

import argparse
import os
import sys


def _build_parser():
    ap = argparse.ArgumentParser(prog="stagdg",
                                 description="Staggered space-time DG solver "
                                             "for 2D linear elastic waves")
    ap.add_argument("--threads", type=int, default=0,
                    help="BLAS thread count (0 = library default)")
    ap.add_argument("--reproducible", action="store_true",
                    help="fixed-order reductions (single-process numpy runs "
                         "are already deterministic; accepted for parity)")
    ap.add_argument("--output-dir", default=None, help="output directory")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration")
    p_run.add_argument("config")

    p_conv = sub.add_parser("convergence", help="mesh-refinement study")
    p_conv.add_argument("config")
    p_conv.add_argument("--meshes", required=True,
                        help="comma-separated mesh files, coarse to fine")

    p_sliv = sub.add_parser("slivers", help="sliver preconditioner study")
    p_sliv.add_argument("config")
    p_sliv.add_argument("--resolution", type=int, default=12,
                        help="grid resolution n (2*n*n triangles)")
    p_sliv.add_argument("--steps", type=int, default=6,
                        help="time steps to average over")
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.threads > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .config import ConfigError, load_config
    from . import driver

    try:
        cfg = load_config(args.config)
        if args.reproducible:
            cfg.reproducible = True
        if args.command == "run":
            driver.run(cfg, args.output_dir)
        elif args.command == "convergence":
            meshes = [m for m in args.meshes.split(",") if m]
            driver.convergence(cfg, meshes, args.output_dir)
        elif args.command == "slivers":
            driver.sliver_study(cfg, args.output_dir, n=args.resolution,
                                steps=args.steps)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
