"""Delaunay triangulation and a truss-equilibrium (DistMesh-style) generator.

Two Delaunay back ends share one contract: ``"bowyer-watson"`` is a plain
incremental implementation with exact in-circle fallbacks, meant for small
point sets and cross-checking; ``"qhull"`` wraps :class:`scipy.spatial.Delaunay`
and is what the mesh generator calls on every retriangulation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay as _QhullDelaunay
from scipy.spatial import cKDTree

from .geometry import GeometryError, Polygon, signed_distance
from .grid import StructuredGrid

__all__ = [
    "TriMesh",
    "DistMeshParams",
    "delaunay",
    "bowyer_watson",
    "in_circle",
    "half_average_diagonal",
    "boundary_nodes",
    "hex_lattice",
    "distmesh_generate",
    "delaunay_violations",
    "triangle_quality",
    "read_mesh",
    "write_mesh",
]

log = logging.getLogger(__name__)


@dataclass
class TriMesh:
    """Nodes ``(N, 2)``, counterclockwise triangles ``(T, 3)`` and boundary flags ``(N,)``."""

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_flags: np.ndarray
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.boundary_flags is None:
            self.boundary_flags = np.zeros(len(self.nodes), dtype=bool)
        self.boundary_flags = np.asarray(self.boundary_flags, dtype=bool)
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.nodes)):
            raise ValueError("triangle index out of range")

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_interior(self) -> int:
        return int(np.sum(~self.boundary_flags))

    def areas(self) -> np.ndarray:
        t = self.nodes[self.triangles]
        return 0.5 * ((t[:, 1, 0] - t[:, 0, 0]) * (t[:, 2, 1] - t[:, 0, 1])
                      - (t[:, 1, 1] - t[:, 0, 1]) * (t[:, 2, 0] - t[:, 0, 0]))

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted, shape ``(E, 2)``."""
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)


@dataclass
class DistMeshParams:
    h0: float
    Fscale: float = 1.2
    dt: float = 0.2
    retriangulation_threshold: float | None = None
    move_tol: float | None = None
    max_iters: int = 500

    def __post_init__(self):
        if self.retriangulation_threshold is None:
            self.retriangulation_threshold = 0.1 * self.h0
        if self.move_tol is None:
            self.move_tol = 1e-3 * self.h0
        for name in ("h0", "Fscale", "dt", "retriangulation_threshold", "move_tol", "max_iters"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


# ---------------------------------------------------------------- predicates

def _orient_exact(a, b, c) -> int:
    ax, ay, bx, by, cx, cy = (Fraction(v) for v in (*a, *b, *c))
    d = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (d > 0) - (d < 0)


def _orient(a, b, c) -> int:
    dl = (b[0] - a[0]) * (c[1] - a[1])
    dr = (b[1] - a[1]) * (c[0] - a[0])
    d = float(dl - dr)
    if abs(d) > 1e-14 * (abs(dl) + abs(dr)):
        return (d > 0) - (d < 0)
    return _orient_exact(a, b, c)


def _in_circle_exact(a, b, c, d) -> int:
    ax, ay, bx, by, cx, cy, dx, dy = (Fraction(v) for v in (*a, *b, *c, *d))
    adx, ady, bdx, bdy, cdx, cdy = ax - dx, ay - dy, bx - dx, by - dy, cx - dx, cy - dy
    det = ((adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
           - (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady)
           + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady))
    return (det > 0) - (det < 0)


def in_circle(a, b, c, d) -> int:
    """+1 if ``d`` is strictly inside the circumcircle of CCW triangle ``abc``, -1 outside, 0 on it."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    t1 = alift * (bdx * cdy - cdx * bdy)
    t2 = blift * (adx * cdy - cdx * ady)
    t3 = clift * (adx * bdy - bdx * ady)
    det = float(t1 - t2 + t3)
    if abs(det) > 1e-12 * (abs(t1) + abs(t2) + abs(t3)):
        return (det > 0) - (det < 0)
    return _in_circle_exact(a, b, c, d)


# ---------------------------------------------------------------- Delaunay

def _validate(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise GeometryError("need at least 3 points")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("points must be finite")
    pairs = cKDTree(pts).query_pairs(1e-12)
    if pairs:
        i, j = sorted(min(pairs))
        raise GeometryError(f"duplicate points {i} and {j}")
    rel = pts - pts[0]
    scale = np.max(np.abs(rel))
    if np.linalg.matrix_rank(rel / scale, tol=1e-12) < 2:
        raise GeometryError("points are collinear")
    return pts


def _ccw(pts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    t = pts[tris]
    area = (t[:, 1, 0] - t[:, 0, 0]) * (t[:, 2, 1] - t[:, 0, 1]) - (t[:, 1, 1] - t[:, 0, 1]) * (t[:, 2, 0] - t[:, 0, 0])
    tris = tris.copy()
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _canonical(tris: np.ndarray) -> np.ndarray:
    # rotate each triangle to start at its smallest index, then sort rows
    tris = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    k = np.argmin(tris, axis=1)
    idx = (k[:, None] + np.arange(3)[None, :]) % 3
    rot = np.take_along_axis(tris, idx, axis=1)
    return rot[np.lexsort(rot.T[::-1])]


def bowyer_watson(points) -> np.ndarray:
    """Incremental Delaunay triangulation; returns CCW index triples.

    Points are inserted in lexicographic order, so the output does not
    depend on the input order.  Cocircular configurations are resolved by
    that order (a point exactly on a circumcircle does not invalidate it).
    """
    pts = _validate(points)
    n = len(pts)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    mid = 0.5 * (lo + hi)
    span = max(hi - lo) or 1.0
    big = 1e3 * span
    sup = np.array([[mid[0] - 2 * big, mid[1] - big], [mid[0] + 2 * big, mid[1] - big], [mid[0], mid[1] + 2 * big]])
    allp = [(float(x), float(y)) for x, y in np.vstack([pts, sup])]
    tris = {(n, n + 1, n + 2)}
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    for pi in order:
        p = allp[pi]
        bad = [t for t in tris if in_circle(allp[t[0]], allp[t[1]], allp[t[2]], p) > 0]
        if not bad:
            # p lies on circumcircles only; split the triangle that contains it
            bad = [t for t in tris if all(_orient(allp[t[k]], allp[t[(k + 1) % 3]], p) >= 0 for k in range(3))][:1]
        count: dict = {}
        for t in bad:
            for k in range(3):
                e = (t[k], t[(k + 1) % 3])
                key = (min(e), max(e))
                count[key] = count.get(key, 0) + 1
        for t in bad:
            tris.discard(t)
        for t in bad:
            for k in range(3):
                a, b = t[k], t[(k + 1) % 3]
                if count[(min(a, b), max(a, b))] == 1 and _orient(allp[a], allp[b], p) > 0:
                    tris.add((a, b, int(pi)))
    out = np.array([t for t in tris if max(t) < n], dtype=np.int64).reshape(-1, 3)
    return _canonical(out)


def delaunay(points, method: str = "qhull") -> TriMesh:
    """Delaunay triangulation of the convex hull of ``points``.

    Raises
    ------
    GeometryError
        Fewer than three points, duplicates (within 1e-12) or all points
        collinear.
    """
    pts = _validate(points)
    if method == "bowyer-watson":
        tris = bowyer_watson(pts)
    elif method == "qhull":
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        tri = _QhullDelaunay(pts[order], qhull_options="Qbb Qc Qz Q12")
        tris = _canonical(_ccw(pts, order[tri.simplices]))
    else:
        raise ValueError(f"unknown method {method!r}")
    return TriMesh(pts, tris, np.zeros(len(pts), dtype=bool))


def circumcircles(nodes: np.ndarray, tris: np.ndarray):
    """Circumcenters ``(T, 2)`` and radii ``(T,)``."""
    a, b, c = (nodes[tris[:, k]] for k in range(3))
    bx, by = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    cx, cy = c[:, 0] - a[:, 0], c[:, 1] - a[:, 1]
    d = 2.0 * (bx * cy - by * cx)
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return np.column_stack([a[:, 0] + ux, a[:, 1] + uy]), np.hypot(ux, uy)


def delaunay_violations(mesh: TriMesh, rtol: float = 1e-10) -> np.ndarray:
    """Indices of triangles whose open circumdisk holds another mesh node."""
    centers, radii = circumcircles(mesh.nodes, mesh.triangles)
    tree = cKDTree(mesh.nodes)
    bad = []
    for t, (c, r) in enumerate(zip(centers, radii)):
        for k in tree.query_ball_point(c, r * (1 - rtol)):
            if k not in mesh.triangles[t]:
                bad.append(t)
                break
    return np.array(bad, dtype=np.int64)


def triangle_quality(mesh: TriMesh) -> np.ndarray:
    """``2 r_in / r_circ``: 1 for equilateral, 0 for degenerate."""
    t = mesh.nodes[mesh.triangles]
    la = np.hypot(*(t[:, 1] - t[:, 2]).T)
    lb = np.hypot(*(t[:, 2] - t[:, 0]).T)
    lc = np.hypot(*(t[:, 0] - t[:, 1]).T)
    return (lb + lc - la) * (lc + la - lb) * (la + lb - lc) / (la * lb * lc)


# ---------------------------------------------------------------- generator

def half_average_diagonal(g: StructuredGrid) -> float:
    """Half the mean length of both diagonals over all cells."""
    p = g.points
    d1 = np.hypot(*(p[1:, 1:] - p[:-1, :-1]).transpose(2, 0, 1))
    d2 = np.hypot(*(p[:-1, 1:] - p[1:, :-1]).transpose(2, 0, 1))
    return 0.5 * float(np.mean(np.concatenate([d1.ravel(), d2.ravel()])))


def boundary_nodes(p: Polygon, h0: float) -> np.ndarray:
    """Each polygon edge split into ``ceil(length / h0)`` equal pieces."""
    out = []
    a, b = p.edges
    for pa, pb in zip(a, b):
        k = max(1, math.ceil(float(np.hypot(*(pb - pa))) / h0 - 1e-9))
        t = np.arange(k)[:, None] / k
        out.append(pa + t * (pb - pa))
    return np.vstack(out)


def hex_lattice(p: Polygon, h0: float, margin: float) -> np.ndarray:
    """Equilateral lattice of pitch ``h0`` keeping points at least ``margin`` inside."""
    x0, y0, x1, y1 = p.bbox()
    dy = h0 * math.sqrt(3) / 2
    rows = []
    for r, y in enumerate(np.arange(y0, y1 + dy, dy)):
        xs = np.arange(x0 + (r % 2) * h0 / 2, x1 + h0, h0)
        rows.append(np.column_stack([xs, np.full_like(xs, y)]))
    pts = np.vstack(rows)
    return pts[signed_distance(p, pts) < -margin]


def _distance_gradient(p: Polygon, q: np.ndarray, step: float) -> np.ndarray:
    ex = np.array([step, 0.0])
    ey = np.array([0.0, step])
    gx = (signed_distance(p, q + ex) - signed_distance(p, q - ex)) / (2 * step)
    gy = (signed_distance(p, q + ey) - signed_distance(p, q - ey)) / (2 * step)
    return np.column_stack([gx, gy])


def _inside_triangles(p: Polygon, pts: np.ndarray, nfix: int) -> np.ndarray:
    tris = _QhullDelaunay(pts, qhull_options="Qbb Qc Qz Q12").simplices
    tris = _ccw(pts, tris)
    keep = signed_distance(p, pts[tris].mean(axis=1)) < -1e-12
    tris = tris[keep]
    t = pts[tris]
    area = (t[:, 1, 0] - t[:, 0, 0]) * (t[:, 2, 1] - t[:, 0, 1]) - (t[:, 1, 1] - t[:, 0, 1]) * (t[:, 2, 0] - t[:, 0, 0])
    return tris[area > 0]


def _open_star_nodes(tris: np.ndarray, nfix: int) -> np.ndarray:
    """Interior nodes lying on an edge used by only one triangle."""
    e = np.sort(np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    edges, count = np.unique(e, axis=0, return_counts=True)
    ends = edges[count == 1].ravel()
    return np.unique(ends[ends >= nfix])


def _close_stars(p: Polygon, pts: np.ndarray, nfix: int):
    """Final triangulation after removing interior nodes on the mesh boundary.

    A node held ``geps`` inside an edge between two fixed nodes loses the
    sliver triangle that would close its star; the FEM would then treat a
    boundary node as an unknown.
    """
    removed = 0
    while True:
        tris = _inside_triangles(p, pts, nfix)
        bad = _open_star_nodes(tris, nfix)
        if bad.size == 0:
            return tris, pts, removed
        pts = np.delete(pts, bad, axis=0)
        removed += bad.size


def distmesh_generate(poly: Polygon, params: DistMeshParams, seed_points=None) -> TriMesh:
    """Truss-equilibrium triangulation with a fixed, resampled boundary.

    Parameters
    ----------
    poly : Polygon
    params : DistMeshParams
    seed_points : array_like, optional
        Initial interior nodes (e.g. the inner nodes of a structured grid).
        Without them an equilateral lattice of pitch ``h0`` is used.

    Returns
    -------
    TriMesh
        ``warnings`` lists non-termination and low-quality triangles.
    """
    h0 = params.h0
    fixed = boundary_nodes(poly, h0)
    nfix = len(fixed)
    geps = 1e-3 * h0
    if seed_points is None:
        interior = hex_lattice(poly, h0, 0.5 * h0)
    else:
        interior = np.asarray(seed_points, dtype=float).reshape(-1, 2)
        if np.any(signed_distance(poly, interior) >= 0):
            raise GeometryError("seed points must lie strictly inside the polygon")
        # seeds sitting on top of a boundary node would make slivers
        near = cKDTree(fixed).query(interior)[0] < 0.5 * h0 if len(interior) else np.zeros(0, bool)
        interior = interior[~near]
    if len(interior) == 0:
        raise GeometryError(f"no interior nodes for h0={h0}; the spacing is too large for this region")

    pts = np.vstack([fixed, interior])
    rest = params.Fscale * h0
    pold = np.full_like(pts, np.inf)
    warnings = []
    tris = None
    bars = None
    converged = False
    for it in range(params.max_iters):
        if np.max(np.hypot(*(pts - pold).T)) > params.retriangulation_threshold:
            pold = pts.copy()
            tris = _inside_triangles(poly, pts, nfix)
            e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
            bars = np.unique(np.sort(e, axis=1), axis=0)
        vec = pts[bars[:, 0]] - pts[bars[:, 1]]
        length = np.hypot(vec[:, 0], vec[:, 1])
        force = np.maximum(rest - length, 0.0)
        fvec = (force / length)[:, None] * vec
        total = np.zeros_like(pts)
        np.add.at(total, bars[:, 0], fvec)
        np.add.at(total, bars[:, 1], -fvec)
        total[:nfix] = 0.0
        step = params.dt * total
        pts = pts + step
        mov = pts[nfix:]
        d = signed_distance(poly, mov)
        out = d > -geps
        if np.any(out):
            grad = _distance_gradient(poly, mov[out], geps)
            norm = np.hypot(grad[:, 0], grad[:, 1])[:, None]
            mov[out] -= (d[out] + geps)[:, None] * grad / np.where(norm > 0, norm, 1.0)
            pts[nfix:] = mov
        if np.max(np.hypot(*step[nfix:].T)) < params.move_tol:
            converged = True
            break
    if not converged:
        warnings.append(f"no equilibrium after {params.max_iters} iterations")

    tris, pts, removed = _close_stars(poly, pts, nfix)
    if removed:
        warnings.append(f"{removed} interior nodes pressed onto the boundary were removed")
    used = np.zeros(len(pts), dtype=bool)
    used[tris.ravel()] = True
    used[:nfix] = True
    renum = np.cumsum(used) - 1
    flags = np.zeros(len(pts), dtype=bool)
    flags[:nfix] = True
    mesh = TriMesh(pts[used], renum[tris], flags[used])
    q = triangle_quality(mesh)
    slivers = np.flatnonzero(q < 0.02)
    if slivers.size:
        warnings.append(f"{slivers.size} triangles with quality below 0.02: {slivers.tolist()[:20]}")
    dropped = int(np.sum(~used))
    if dropped:
        warnings.append(f"{dropped} interior nodes ended outside every triangle and were dropped")
    mesh.warnings = warnings
    for w in warnings:
        log.warning(w)
    return mesh


def write_mesh(path, mesh: TriMesh) -> None:
    """``nv nt`` header, ``x y b`` node rows, 1-based CCW triangle rows."""
    rows = [f"{len(mesh.nodes)} {len(mesh.triangles)}"]
    rows += [f"{x:.17g} {y:.17g} {int(b)}" for (x, y), b in zip(mesh.nodes, mesh.boundary_flags)]
    rows += [f"{a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(rows) + "\n")


def read_mesh(path) -> TriMesh:
    lines = Path(path).read_text().split("\n")
    try:
        nv, nt = (int(t) for t in lines[0].split())
        nodes = [ln.split() for ln in lines[1 : 1 + nv]]
        xy = np.array([[float(r[0]), float(r[1])] for r in nodes])
        flags = np.array([r[2] == "1" for r in nodes])
        tris = np.array([[int(t) - 1 for t in ln.split()] for ln in lines[1 + nv : 1 + nv + nt]], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"malformed mesh file {path}: {exc}") from exc
    return TriMesh(xy, tris.reshape(-1, 3), flags)
