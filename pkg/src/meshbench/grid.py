"""Logically rectangular grids with a fixed polygonal boundary.

Index convention: ``points[i, j]`` with ``i`` running horizontally over
``n`` nodes and ``j`` vertically over ``m`` nodes, so ``points`` has shape
``(n, m, 2)``.  Cell ``(i, j)`` has the counterclockwise corners

    A = P[i, j], B = P[i+1, j], C = P[i+1, j+1], D = P[i, j+1].

The boundary walk starts at ``P[0, 0]`` and runs bottom, right, top, left,
which is counterclockwise for a positively oriented region.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import GeometryError, Polygon, polygon_signed_area

__all__ = [
    "BoundarySpec",
    "StructuredGrid",
    "distribute_boundary",
    "transfinite_init",
    "cell_triangle_areas",
    "cell_areas",
    "min_alpha",
    "default_eps",
    "is_convex",
    "node_areas",
    "read_grid",
    "write_grid",
]


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary nodes of an ``m x n`` grid, ``2(m+n-2)`` of them."""

    m: int
    n: int
    nodes: np.ndarray
    corner_indices: tuple[int, int, int, int] = field(init=False)

    def __post_init__(self):
        m, n = self.m, self.n
        if m < 2 or n < 2:
            raise ValueError(f"need m, n >= 2, got m={m}, n={n}")
        nodes = np.array(self.nodes, dtype=float)
        if nodes.shape != (2 * (m + n - 2), 2):
            raise ValueError(f"expected {2 * (m + n - 2)} boundary nodes, got {len(nodes)}")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "corner_indices", (0, n - 1, n + m - 2, 2 * n + m - 3))

    def sides(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Bottom, right, top, left sides in grid index order.

        Bottom and top run with increasing ``i``; right and left with
        increasing ``j``.  Corners are shared.
        """
        m, n = self.m, self.n
        v = self.nodes
        c0, c1, c2, c3 = self.corner_indices
        bottom = v[c0 : c1 + 1]
        right = v[c1 : c2 + 1]
        top = v[c2 : c3 + 1][::-1]
        left = np.vstack([v[c3:], v[:1]])[::-1]
        assert len(bottom) == n and len(top) == n and len(right) == m and len(left) == m
        return bottom, right, top, left

    def polygon(self) -> Polygon:
        return Polygon(self.nodes)


def _arc(vertices: np.ndarray, start: int, stop: int) -> np.ndarray:
    k = len(vertices)
    idx = [start]
    while idx[-1] != stop:
        idx.append((idx[-1] + 1) % k)
    return vertices[idx]


def _resample(arc: np.ndarray, count: int) -> np.ndarray:
    seg = np.hypot(*np.diff(arc, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = np.linspace(0.0, s[-1], count)
    out = np.column_stack([np.interp(t, s, arc[:, 0]), np.interp(t, s, arc[:, 1])])
    out[0], out[-1] = arc[0], arc[-1]
    return out


def distribute_boundary(p: Polygon, corners, m: int, n: int) -> BoundarySpec:
    """Resample the four arcs between ``corners`` by arc length.

    Parameters
    ----------
    p : Polygon
        Region boundary (counterclockwise after normalization).
    corners : sequence of 4 ints
        Vertex indices of ``p`` where the bottom, right, top and left sides
        start.  They must appear in counterclockwise cyclic order.
    m, n : int
        Vertical and horizontal point counts per side.

    Returns
    -------
    BoundarySpec
        Bottom and top arcs get ``n`` points, right and left ``m``; corner
        vertices are reproduced exactly.
    """
    if m < 2 or n < 2:
        raise ValueError(f"need m, n >= 2, got m={m}, n={n}")
    k = len(p)
    c = [int(ci) for ci in corners]
    if len(c) != 4 or len(set(c)) != 4 or any(ci < 0 or ci >= k for ci in c):
        raise ValueError(f"need 4 distinct corner indices in [0, {k}), got {corners}")
    offsets = [(ci - c[0]) % k for ci in c]
    if not offsets[1] < offsets[2] < offsets[3]:
        raise ValueError(f"corners {c} are not in counterclockwise cyclic order")
    counts = (n, m, n, m)
    parts = []
    for s in range(4):
        arc = _arc(p.vertices, c[s], c[(s + 1) % 4])
        parts.append(_resample(arc, counts[s])[:-1])
    return BoundarySpec(m, n, np.vstack(parts))


@dataclass(frozen=True)
class StructuredGrid:
    """Node array ``points`` of shape ``(n, m, 2)``; see module docstring."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 3 or pts.shape[2] != 2 or pts.shape[0] < 2 or pts.shape[1] < 2:
            raise ValueError(f"bad grid array shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.points[..., 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[..., 1]

    @property
    def n_cells(self) -> int:
        return (self.m - 1) * (self.n - 1)

    def interior(self) -> np.ndarray:
        """Interior nodes, shape ``(n-2, m-2, 2)``."""
        return self.points[1:-1, 1:-1]

    def boundary(self) -> BoundarySpec:
        p = self.points
        nodes = np.vstack([p[:-1, 0], p[-1, :-1], p[:0:-1, -1], p[0, :0:-1]])
        return BoundarySpec(self.m, self.n, nodes)

    def with_interior(self, interior: np.ndarray) -> StructuredGrid:
        pts = self.points.copy()
        pts[1:-1, 1:-1] = np.reshape(interior, pts[1:-1, 1:-1].shape)
        return StructuredGrid(pts)


def transfinite_init(b: BoundarySpec) -> StructuredGrid:
    """Bilinear Coons patch of the four sides, using index parameters."""
    bottom, right, top, left = b.sides()
    n, m = b.n, b.m
    s = np.linspace(0.0, 1.0, n)[:, None, None]
    t = np.linspace(0.0, 1.0, m)[None, :, None]
    bt = bottom[:, None, :]
    tp = top[:, None, :]
    lf = left[None, :, :]
    rt = right[None, :, :]
    p00, p10, p11, p01 = bottom[0], bottom[-1], top[-1], top[0]
    pts = (
        (1 - t) * bt + t * tp + (1 - s) * lf + s * rt
        - ((1 - s) * (1 - t) * p00 + s * (1 - t) * p10 + s * t * p11 + (1 - s) * t * p01)
    )
    pts[:, 0], pts[-1, :], pts[:, -1], pts[0, :] = bottom, right, top, left
    return StructuredGrid(pts)


def _corners(points: np.ndarray):
    a = points[:-1, :-1]
    b = points[1:, :-1]
    c = points[1:, 1:]
    d = points[:-1, 1:]
    return a, b, c, d


def _cross(o, p, q):
    return (p[..., 0] - o[..., 0]) * (q[..., 1] - o[..., 1]) - (p[..., 1] - o[..., 1]) * (q[..., 0] - o[..., 0])


def cell_triangle_areas(g: StructuredGrid) -> np.ndarray:
    """Corner-triangle signed areas, shape ``(n-1, m-1, 4)``.

    The four entries of cell ``(i, j)`` are the areas of triangles
    ``(A,B,D)``, ``(B,C,A)``, ``(C,D,B)`` and ``(D,A,C)``.
    """
    a, b, c, d = _corners(g.points if isinstance(g, StructuredGrid) else np.asarray(g))
    return 0.5 * np.stack([_cross(a, b, d), _cross(b, c, a), _cross(c, d, b), _cross(d, a, c)], axis=-1)


def cell_areas(g: StructuredGrid) -> np.ndarray:
    """Signed quadrilateral areas, shape ``(n-1, m-1)``."""
    return 0.5 * cell_triangle_areas(g).sum(axis=-1)


def min_alpha(g: StructuredGrid) -> float:
    return float(cell_triangle_areas(g).min())


def default_eps(g: StructuredGrid) -> float:
    """Scale-relative zero for corner areas."""
    return 1e-12 * abs(polygon_signed_area(g.boundary().nodes)) / g.n_cells


def is_convex(g: StructuredGrid, eps: float | None = None) -> bool:
    """True iff every corner-triangle area exceeds ``eps``."""
    if eps is None:
        eps = default_eps(g)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return bool(np.all(cell_triangle_areas(g) > eps))


def node_areas(g: StructuredGrid) -> np.ndarray:
    """Quarter of the summed adjacent cell areas at every node, shape ``(n, m)``."""
    if not is_convex(g):
        raise GeometryError("node areas need a convex grid")
    q = 0.25 * cell_areas(g)
    w = np.zeros(g.points.shape[:2])
    w[:-1, :-1] += q
    w[1:, :-1] += q
    w[1:, 1:] += q
    w[:-1, 1:] += q
    return w


def write_grid(path, g: StructuredGrid) -> None:
    """``m n`` header, then ``x y`` rows with ``i`` varying fastest."""
    rows = [f"{g.m} {g.n}"]
    for j in range(g.m):
        for i in range(g.n):
            x, y = g.points[i, j]
            rows.append(f"{x:.17g} {y:.17g}")
    Path(path).write_text("\n".join(rows) + "\n")


def read_grid(path) -> StructuredGrid:
    lines = Path(path).read_text().split("\n")
    try:
        m, n = (int(t) for t in lines[0].split())
        data = np.array([[float(t) for t in ln.split()] for ln in lines[1 : 1 + m * n]])
        pts = data.reshape(m, n, 2).transpose(1, 0, 2)
    except ValueError as exc:
        raise ValueError(f"malformed grid file {path}: {exc}") from exc
    return StructuredGrid(pts)
