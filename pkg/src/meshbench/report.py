"""Error norms, empirical orders and the region/size/method/problem harness."""
from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fem import solve_fem
from .functionals import FunctionalConfig, optimize_grid
from .geometry import read_polygon, scale_to_unit, signed_distance
from .gfd import solve_fd
from .grid import distribute_boundary, node_areas
from .problems import Problem, builtin_problem
from .triangulation import DistMeshParams, delaunay_violations, distmesh_generate, half_average_diagonal

__all__ = [
    "METHODS",
    "ExperimentRecord",
    "ExperimentConfig",
    "quadratic_error",
    "empirical_order",
    "fd_error",
    "fem_error",
    "run_experiment",
    "read_config",
    "write_csv",
    "write_svg",
    "format_table",
]

log = logging.getLogger(__name__)

METHODS = ("structured-fd", "distmesh-a-fem", "distmesh-b-fem")
CSV_COLUMNS = ["region", "size", "method", "problem", "elements", "unknowns", "error", "order"]


def quadratic_error(numeric, exact, areas) -> float:
    """``sqrt(sum((u_i - U_i)^2 * A_i))`` over matching samples."""
    numeric = np.asarray(numeric, dtype=float).ravel()
    exact = np.asarray(exact, dtype=float).ravel()
    areas = np.asarray(areas, dtype=float).ravel()
    if not (numeric.shape == exact.shape == areas.shape):
        raise ValueError(f"length mismatch: {numeric.size}, {exact.size}, {areas.size}")
    if np.any(areas < 0):
        raise ValueError("areas must be non-negative")
    d = numeric - exact
    return float(np.sqrt(np.sum(d * d * areas)))


def empirical_order(e_i: float, e_j: float, n_i: float, n_j: float) -> float:
    """``log(e_i / e_j) / log(n_j / n_i)`` for the coarser size ``n_i``."""
    if min(e_i, e_j, n_i, n_j) <= 0:
        raise ValueError("errors and sizes must be positive")
    if not n_j > n_i:
        raise ValueError("need n_j > n_i")
    return math.log(e_i / e_j) / math.log(n_j / n_i)


def fd_error(grid, u, prob: Problem) -> float:
    """Interior nodes weighted by a quarter of their adjacent cell areas."""
    w = node_areas(grid)[1:-1, 1:-1]
    exact = prob.u_exact(grid.x, grid.y)[1:-1, 1:-1]
    return quadratic_error(np.asarray(u)[1:-1, 1:-1], exact, w)


def fem_error(mesh, u, prob: Problem) -> float:
    """Element centroids weighted by element areas."""
    c = mesh.centroids()
    uc = np.asarray(u)[mesh.triangles].mean(axis=1)
    return quadratic_error(uc, prob.u_exact(c[:, 0], c[:, 1]), mesh.areas())


@dataclass
class ExperimentRecord:
    region: str
    size: int
    method: str
    problem: int
    elements: int
    unknowns: int
    error: float
    order: float | None = None
    notes: str = ""


@dataclass
class RegionSpec:
    name: str
    polygon: Path
    corners: tuple[int, int, int, int]


@dataclass
class ExperimentConfig:
    regions: list[RegionSpec]
    sizes: list[int] = field(default_factory=lambda: [21, 41, 81])
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    problems: list[int] = field(default_factory=lambda: [1, 2, 3])
    functional: FunctionalConfig = field(default_factory=FunctionalConfig)
    fd_solver: str = "gauss-seidel"
    fd_tol: float = 1e-10
    fd_max_iters: int = 200_000
    fem_solver: str = "direct"
    distmesh_max_iters: int = 500

    def __post_init__(self):
        if not self.regions:
            raise ValueError("no regions configured")
        if any(s < 3 for s in self.sizes) or any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError(f"sizes must be >= 3 and strictly increasing, got {self.sizes}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if any(p not in (1, 2, 3) for p in self.problems):
            raise ValueError(f"problems must be 1, 2 or 3, got {self.problems}")


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def read_config(path) -> ExperimentConfig:
    """Parse the flat ``key = value`` comparison config.

    Recognized keys: ``regions``, ``sizes``, ``problems``, ``methods``,
    ``region.<name>.polygon``, ``region.<name>.corners`` and the scalar
    options ``sigma``, ``omega0``, ``fd_solver``, ``fd_tol``,
    ``fd_max_iters``, ``fem_solver``.  Polygon paths are relative to the
    config file.
    """
    path = Path(path)
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        kv[k.strip()] = v.strip()
    names = [t for t in kv.get("regions", "").replace(",", " ").split()]
    regions = []
    for nm in names:
        try:
            poly = path.parent / kv[f"region.{nm}.polygon"]
            corners = tuple(_ints(kv[f"region.{nm}.corners"]))
        except KeyError as exc:
            raise ValueError(f"{path}: region {nm!r} needs {exc.args[0]}") from None
        if len(corners) != 4:
            raise ValueError(f"{path}: region {nm!r} needs 4 corners")
        regions.append(RegionSpec(nm, poly, corners))
    fcfg = FunctionalConfig(
        sigma=float(kv.get("sigma", 0.5)),
        omega0=float(kv["omega0"]) if "omega0" in kv else None,
    )
    opts = {}
    for key, conv in (("fd_solver", str), ("fd_tol", float), ("fd_max_iters", int), ("fem_solver", str)):
        if key in kv:
            opts[key] = conv(kv[key])
    return ExperimentConfig(
        regions=regions,
        sizes=_ints(kv["sizes"]) if "sizes" in kv else [21, 41, 81],
        methods=kv["methods"].replace(",", " ").split() if "methods" in kv else list(METHODS),
        problems=_ints(kv["problems"]) if "problems" in kv else [1, 2, 3],
        functional=fcfg,
        **opts,
    )


def _run_region(region: RegionSpec, cfg: ExperimentConfig):
    """All records and failure diagnostics for one region."""
    records: list[ExperimentRecord] = []
    failures: list[str] = []
    problems = {pid: builtin_problem(pid) for pid in cfg.problems}
    try:
        poly = scale_to_unit(read_polygon(region.polygon))
    except Exception as exc:  # noqa: BLE001 - a broken region must not stop the run
        return records, [f"{region.name}: cannot load polygon: {exc}"]

    def fail(size, method, what, exc):
        for pid in cfg.problems:
            failures.append(f"{region.name} {size} {method} p{pid}: {what}: {exc}")

    for size in cfg.sizes:
        t0 = time.perf_counter()
        try:
            res = optimize_grid(distribute_boundary(poly, region.corners, size, size), cfg.functional)
        except Exception as exc:  # noqa: BLE001
            for method in cfg.methods:
                fail(size, method, "grid generation failed", exc)
            continue
        grid = res.grid
        log.info("%s %d: grid convex=%s min alpha=%.3e (%.1fs)", region.name, size, res.convex, res.min_alpha,
                 time.perf_counter() - t0)

        for method in cfg.methods:
            if method == "structured-fd":
                if not res.convex:
                    fail(size, method, "grid not convex", f"min alpha {res.min_alpha:.3e}")
                    continue
                for pid, prob in problems.items():
                    try:
                        u, info = solve_fd(grid, prob, cfg.fd_solver, cfg.fd_tol, cfg.fd_max_iters)
                        note = "direct fallback" if info["fallback"] else f"{info['iterations']} sweeps"
                        records.append(ExperimentRecord(region.name, size, method, pid, 2 * grid.n_cells,
                                                        info["unknowns"], fd_error(grid, u, prob), notes=note))
                    except Exception as exc:  # noqa: BLE001
                        failures.append(f"{region.name} {size} {method} p{pid}: {exc}")
                continue
            h0 = half_average_diagonal(grid)
            seeds = None
            note = ""
            if method == "distmesh-b-fem":
                if not res.convex:
                    fail(size, method, "grid not convex", f"min alpha {res.min_alpha:.3e}")
                    continue
                seeds = grid.interior().reshape(-1, 2)
                # the resampled grid boundary cuts across reflex polygon vertices,
                # so a few inner grid nodes can sit on or outside the true polygon
                inside = signed_distance(poly, seeds) < 0
                if not inside.all():
                    note = f"; {int(np.sum(~inside))} seeds outside the polygon dropped"
                    seeds = seeds[inside]
            try:
                mesh = distmesh_generate(poly, DistMeshParams(h0, max_iters=cfg.distmesh_max_iters), seeds)
            except Exception as exc:  # noqa: BLE001
                fail(size, method, "meshing failed", exc)
                continue
            nviol = len(delaunay_violations(mesh))
            note += "".join(f"; {w}" for w in mesh.warnings)
            for pid, prob in problems.items():
                try:
                    u, info = solve_fem(mesh, prob, cfg.fem_solver)
                    records.append(ExperimentRecord(region.name, size, method, pid, mesh.n_triangles,
                                                    info["unknowns"], fem_error(mesh, u, prob),
                                                    notes=f"{nviol} Delaunay violations{note}"))
                except Exception as exc:  # noqa: BLE001
                    failures.append(f"{region.name} {size} {method} p{pid}: {exc}")
    return records, failures


def _attach_orders(records: list[ExperimentRecord], sizes: list[int]) -> None:
    by_key = {(r.region, r.method, r.problem, r.size): r for r in records}
    for r in records:
        k = sizes.index(r.size)
        if k == 0:
            continue
        prev = by_key.get((r.region, r.method, r.problem, sizes[k - 1]))
        if prev is not None and prev.error > 0 and r.error > 0:
            r.order = empirical_order(prev.error, r.error, prev.size, r.size)


def _workers(n_jobs: int) -> int:
    cap = os.environ.get("MESHBENCH_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_jobs))


def run_experiment(cfg: ExperimentConfig, outdir=None):
    """Run every configured (region, size, method, problem) combination.

    Failures are logged and returned, never raised.  With ``outdir`` the
    results are written as ``results.csv``, ``err_p{k}.svg``, ``tables.txt``,
    ``failures.txt`` and ``notes.txt`` (solver fallbacks, Delaunay
    violations, dropped seeds, mesh generator warnings).

    Returns
    -------
    records : list of ExperimentRecord
        Sorted by region (config order), method, problem and size.
    failures : list of str
    """
    workers = _workers(len(cfg.regions))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_region, cfg.regions, [cfg] * len(cfg.regions)))
    else:
        parts = [_run_region(r, cfg) for r in cfg.regions]
    records = [rec for recs, _ in parts for rec in recs]
    failures = [f for _, fs in parts for f in fs]
    rank = {r.name: k for k, r in enumerate(cfg.regions)}
    records.sort(key=lambda r: (rank[r.region], METHODS.index(r.method), r.problem, r.size))
    _attach_orders(records, cfg.sizes)
    if outdir is not None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "results.csv", records)
        for pid in cfg.problems:
            write_svg(out / f"err_p{pid}.svg", records, pid, cfg.sizes[-1])
        (out / "failures.txt").write_text("".join(f + "\n" for f in failures))
        (out / "notes.txt").write_text(
            "".join(f"{r.region} {r.size} {r.method} p{r.problem}: {r.notes}\n" for r in records if r.notes)
        )
        (out / "tables.txt").write_text("\n".join(format_table(records, pid) for pid in cfg.problems))
    return records, failures


def write_csv(path, records) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([r.region, r.size, r.method, r.problem, r.elements, r.unknowns, f"{r.error:.6e}",
                    "" if r.order is None else f"{r.order:.4f}"])
    Path(path).write_text(buf.getvalue())


def format_table(records, problem: int) -> str:
    """Plain-text table in the region / size / error / order layout, one column pair per method."""
    rows = [r for r in records if r.problem == problem]
    cells = {(r.region, r.size, r.method): r for r in rows}
    regions = list(dict.fromkeys(r.region for r in rows))
    sizes = sorted({r.size for r in rows})
    head = f"{'region':<10}{'size':>6}" + "".join(f"{m:>18}{'O':>7}" for m in METHODS)
    lines = [f"Quadratic error, problem {problem}", head, "-" * len(head)]
    for reg in regions:
        for k, s in enumerate(sizes):
            line = f"{reg if k == 0 else '':<10}{s:>6}"
            for m in METHODS:
                r = cells.get((reg, s, m))
                err = "" if r is None else f"{r.error:.2E}"
                order = "" if r is None or r.order is None else f"{r.order:.2f}"
                line += f"{err:>18}{order:>7}"
            lines.append(line)
    return "\n".join(lines) + "\n"


_COLORS = {"structured-fd": "#1f77b4", "distmesh-a-fem": "#ff7f0e", "distmesh-b-fem": "#2ca02c"}


def write_svg(path, records, problem: int, size: int) -> None:
    """Grouped bar chart (log scale) of the errors at one grid size."""
    rows = [r for r in records if r.problem == problem and r.size == size]
    regions = list(dict.fromkeys(r.region for r in rows))
    W, H, left, bottom, top = 640, 360, 70, 50, 30
    plot_h = H - bottom - top
    errs = [r.error for r in rows if r.error > 0]
    lo = math.floor(math.log10(min(errs))) if errs else -6
    hi = math.ceil(math.log10(max(errs))) if errs else 0
    hi = max(hi, lo + 1)

    def ypos(e):
        return top + plot_h * (hi - math.log10(e)) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
        f'<text x="{W / 2}" y="18" text-anchor="middle">Quadratic error, problem {problem}, {size} points per side</text>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{H - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{H - bottom}" x2="{W - 10}" y2="{H - bottom}" stroke="black"/>',
    ]
    for e in range(lo, hi + 1):
        y = ypos(10.0**e)
        parts.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{W - 10}" y2="{y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    group = (W - 10 - left) / max(len(regions), 1)
    bar = group / (len(METHODS) + 1)
    for gi, reg in enumerate(regions):
        x0 = left + gi * group + bar / 2
        for mi, m in enumerate(METHODS):
            r = next((r for r in rows if r.region == reg and r.method == m), None)
            if r is None or r.error <= 0:
                continue
            y = ypos(r.error)
            parts.append(f'<rect x="{x0 + mi * bar:.1f}" y="{y:.1f}" width="{bar * 0.9:.1f}" '
                         f'height="{H - bottom - y:.1f}" fill="{_COLORS[m]}"><title>{reg} {m}: {r.error:.3e}</title></rect>')
        parts.append(f'<text x="{left + (gi + 0.5) * group:.1f}" y="{H - bottom + 16}" text-anchor="middle">{reg}</text>')
    for mi, m in enumerate(METHODS):
        x = left + 10 + mi * 170
        parts.append(f'<rect x="{x}" y="{H - 20}" width="10" height="10" fill="{_COLORS[m]}"/>')
        parts.append(f'<text x="{x + 14}" y="{H - 11}">{m}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
