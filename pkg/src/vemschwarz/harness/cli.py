"""``solve``: run one experiment or a sweep from the command line.

Exit status is 0 when every sweep point succeeds, 2 when some points fail and
1 on a fatal error (bad arguments, unreadable files).
"""

import argparse
import logging
import sys

from ..errors import VemSchwarzError
from .experiment import ExperimentConfig, read_config_file, run_experiment


def build_parser():
    p = argparse.ArgumentParser(
        prog="solve",
        description="Lowest-order 3D virtual elements with a two-level overlapping Schwarz preconditioner.",
    )
    p.add_argument("--config", help="flat key = value file; command-line flags override it")
    p.add_argument("--mesh", help="cubes | voronoi | hexprism | file:PATH")
    p.add_argument("--n", type=int, help="cells per direction (cubes, voronoi) or hexagons per row (hexprism)")
    p.add_argument("--partition", help="structured:M | graph:N | file:PATH")
    p.add_argument("--layers", type=int, help="overlap layers")
    p.add_argument("--rho", choices=["one", "disc"], help="coefficient: 1 or random per subdomain")
    p.add_argument("--rho-max", type=float, dest="rho_max")
    p.add_argument("--rho-min", type=float, dest="rho_min")
    p.add_argument("--seed", type=int)
    p.add_argument("--jitter", type=float, help="Voronoi seed perturbation in [0, 0.5)")
    p.add_argument("--tol", type=float, help="relative residual tolerance (default 1e-6)")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--sweep", help="none | N:v1,v2,.. | Hdelta:.. | Hh:..")
    p.add_argument("--csv", help="write result rows to this CSV file")
    p.add_argument("--vtk", help="write mesh, solution and a coarse function to this VTK file")
    p.add_argument("--no-timings", action="store_true", help="write 0 in the CSV timing columns")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def config_from_args(args):
    values = read_config_file(args.config) if args.config else {}
    for key in ExperimentConfig.field_names():
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if args.no_timings:
        values["timings"] = False
    return ExperimentConfig.from_mapping(values)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = config_from_args(args)
        rows = run_experiment(config, out=None if args.quiet else sys.stdout)
    except (VemSchwarzError, OSError) as exc:
        print(f"solve: error: {exc}", file=sys.stderr)
        return 1
    return 0 if all(r.ok for r in rows) else 2


if __name__ == "__main__":
    sys.exit(main())
