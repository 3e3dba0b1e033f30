"""Command-line entry point: ``meshbench {generate-grid,triangulate,solve,compare}``.

Exit codes: 0 success, 2 usage, 3 I/O, 4 non-convex grid, 5 solver
non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import data_path
from .fem import solve_fem
from .functionals import FunctionalConfig, optimize_grid
from .geometry import GeometryError, read_polygon, scale_to_unit
from .gfd import SolverError, solve_fd
from .grid import StructuredGrid, distribute_boundary, min_alpha, read_grid, write_grid
from .problems import builtin_problem
from .report import fd_error, fem_error, read_config, run_experiment
from .triangulation import (
    DistMeshParams,
    delaunay_violations,
    distmesh_generate,
    half_average_diagonal,
    read_mesh,
    write_mesh,
)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NONCONVEX, EXIT_SOLVER = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


class InputError(OSError):
    pass


def _read(reader, path):
    """Load with ``reader``; malformed or invalid content counts as an I/O failure."""
    try:
        return reader(path)
    except OSError:
        raise
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _corners(text: str) -> list[int]:
    try:
        c = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"corners must be integers, got {text!r}") from None
    if len(c) != 4:
        raise argparse.ArgumentTypeError("need exactly 4 corner indices")
    return c


def _sizes(text: str) -> list[int]:
    return [int(t) for t in text.split(",")]


def _load_polygon(path, scale: bool):
    p = _read(read_polygon, path)
    return scale_to_unit(p) if scale else p


def cmd_generate_grid(args) -> int:
    poly = _load_polygon(args.polygon, not args.no_scale)
    cfg = FunctionalConfig(sigma=args.sigma, omega0=args.omega0, max_omega_updates=args.max_omega_updates)
    b = distribute_boundary(poly, args.corners, args.m, args.n)
    t0 = time.perf_counter()
    res = optimize_grid(b, cfg)
    write_grid(args.out, res.grid)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write("iteration,functional,gradient_norm,min_alpha,omega\n")
            for it, f, gn, am, om in res.trace:
                fh.write(f"{it},{f:.17g},{gn:.17g},{am:.17g},{om:.17g}\n")
    print(f"convex: {res.convex}")
    print(f"min alpha: {res.min_alpha:.6e}")
    print(f"functional: {res.final_functional_value:.6e}")
    print(f"gradient norm: {res.final_gradient_norm:.3e}")
    print(f"omega updates: {res.omega_updates_used} (final omega {res.omega:.3e})")
    print(f"time: {time.perf_counter() - t0:.2f} s")
    return EXIT_OK if res.convex else EXIT_NONCONVEX


def cmd_triangulate(args) -> int:
    chosen = sum(x is not None for x in (args.h0, args.from_grid, args.seed_grid))
    if chosen == 0:
        raise UsageError("give --h0, --from-grid or --seed-grid")
    if args.h0 is not None and chosen > 1:
        raise UsageError("--h0 cannot be combined with a grid option")
    poly = _load_polygon(args.polygon, not args.no_scale)
    seeds = None
    h0 = args.h0
    grid_path = args.seed_grid or args.from_grid
    if grid_path is not None:
        g = _read(read_grid, grid_path)
        h0 = half_average_diagonal(g)
        if args.seed_grid:
            seeds = g.interior().reshape(-1, 2)
    if not h0 > 0:
        raise UsageError(f"h0 must be positive, got {h0}")
    mesh = distmesh_generate(poly, DistMeshParams(h0, max_iters=args.max_iters or 500), seeds)
    write_mesh(args.out, mesh)
    print(f"h0: {h0:.6e}")
    print(f"elements: {mesh.n_triangles}")
    print(f"interior nodes: {mesh.n_interior}")
    print(f"Delaunay violations: {len(delaunay_violations(mesh))}")
    for w in mesh.warnings:
        print(f"warning: {w}")
    return EXIT_OK


def _sniff(path) -> str:
    """``grid`` or ``mesh`` from the header: grids have ``m n``, meshes ``nv nt``
    followed by three-column node rows."""
    with open(path) as fh:
        fh.readline()
        first = fh.readline().split()
    if len(first) not in (2, 3):
        raise InputError(f"{path}: neither a grid nor a mesh file")
    return "mesh" if len(first) == 3 else "grid"


def cmd_solve(args) -> int:
    prob = builtin_problem(args.problem)
    kind = _sniff(args.input)
    if args.method == "fd":
        if kind != "grid":
            raise UsageError("method fd needs a structured grid file")
        g = _read(read_grid, args.input)
        kw = {"tol": args.tol if args.tol is not None else 1e-10}
        if args.max_iters is not None:
            kw["max_iters"] = args.max_iters
        u, info = solve_fd(g, prob, solver=args.solver or "gauss-seidel", **kw)
        err = fd_error(g, u, prob)
        xy = np.stack([g.x, g.y], axis=-1).transpose(1, 0, 2).reshape(-1, 2)
        vals = u.T.ravel()
    else:
        if kind != "mesh":
            raise UsageError("method fem needs a triangle mesh file")
        mesh = _read(read_mesh, args.input)
        u, info = solve_fem(mesh, prob, solver=args.solver or "direct",
                            tol=args.tol if args.tol is not None else 1e-12)
        err = fem_error(mesh, u, prob)
        xy, vals = mesh.nodes, u
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(f"{len(vals)}\n")
            for (x, y), v in zip(xy, vals):
                fh.write(f"{x:.17g} {y:.17g} {v:.17g}\n")
    print(f"unknowns: {info['unknowns']}")
    print(f"iterations: {info['iterations']}")
    if info.get("fallback"):
        print("note: iterative solver did not converge, used direct fallback")
    print(f"quadratic error: {err:.6e}")
    return EXIT_OK


def cmd_compare(args) -> int:
    # the config file plays the role of arguments: bad content is a usage error
    cfg = read_config(args.config)
    if args.sizes:
        cfg.sizes = args.sizes
    if args.regions:
        keep = set(args.regions.split(","))
        cfg.regions = [r for r in cfg.regions if r.name in keep]
    cfg.__post_init__()
    t0 = time.perf_counter()
    records, failures = run_experiment(cfg, args.out)
    for line in (Path(args.out) / "tables.txt").read_text().splitlines():
        print(line)
    print(f"{len(records)} records, {len(failures)} failures, {time.perf_counter() - t0:.1f} s")
    for f in failures:
        print(f"failed: {f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="meshbench",
        description="Convex structured grids, generalized finite differences and linear FEM on polygons.",
        epilog="exit codes: 0 ok, 2 usage, 3 I/O, 4 non-convex grid, 5 solver non-convergence",
    )
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-grid", help="optimize a convex structured grid on a polygon")
    g.add_argument("--polygon", required=True)
    g.add_argument("--corners", type=_corners, required=True, help="i1,i2,i3,i4")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--sigma", type=float, default=0.5)
    g.add_argument("--omega0", type=float)
    g.add_argument("--max-omega-updates", type=int, default=20)
    g.add_argument("--no-scale", action="store_true", help="keep polygon coordinates as given")
    g.add_argument("--trace", help="write the optimizer trace as CSV")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate_grid)

    t = sub.add_parser("triangulate", help="DistMesh-style triangulation of a polygon")
    t.add_argument("--polygon", required=True)
    t.add_argument("--h0", type=float)
    t.add_argument("--from-grid", help="take h0 as half the average diagonal of this grid")
    t.add_argument("--seed-grid", help="like --from-grid, and seed with the grid's inner nodes")
    t.add_argument("--max-iters", type=int)
    t.add_argument("--no-scale", action="store_true")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_triangulate)

    s = sub.add_parser("solve", help="solve a test problem on a grid (fd) or mesh (fem)")
    s.add_argument("input", help="grid or mesh file")
    s.add_argument("--problem", type=int, choices=(1, 2, 3), required=True)
    s.add_argument("--method", choices=("fd", "fem"), required=True)
    s.add_argument("--solver", choices=("gauss-seidel", "direct", "cg"))
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--out", help="write x y u per node")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("compare", help="run the region/size/method/problem comparison")
    c.add_argument("config", nargs="?", default=None, help="key=value config (default: bundled)")
    c.add_argument("--sizes", type=_sizes)
    c.add_argument("--regions", help="comma-separated subset of configured regions")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "config", "x") is None:
        args.config = data_path("compare.cfg")
    if args.command == "solve" and args.solver:
        if (args.method == "fd") == (args.solver == "cg"):
            ap.error(f"solver {args.solver} does not apply to method {args.method}")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"meshbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"meshbench: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SolverError as exc:
        print(f"meshbench: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (GeometryError, ValueError) as exc:
        print(f"meshbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
