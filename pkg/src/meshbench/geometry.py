"""Planar primitives: signed areas, point location, signed distance and scaling.

Points are handled as plain ``(x, y)`` pairs or ``(N, 2)`` float arrays; a
:class:`Polygon` wraps a validated, counterclockwise vertex array.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = [
    "GeometryError",
    "Polygon",
    "triangle_signed_area",
    "polygon_signed_area",
    "point_in_polygon",
    "signed_distance",
    "segment_distance",
    "scale_to_unit",
    "read_polygon",
    "write_polygon",
]

ON_BOUNDARY_TOL = 1e-12


class GeometryError(ValueError):
    """Raised for degenerate or invalid planar input."""


def triangle_signed_area(a, b, c):
    """Signed area of triangle ``abc``; positive when counterclockwise.

    Works elementwise on arrays of shape ``(..., 2)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    return 0.5 * (
        (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
        - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])
    )


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1 = triangle_signed_area(q1, q2, p1)
    d2 = triangle_signed_area(q1, q2, p2)
    d3 = triangle_signed_area(p1, p2, q1)
    d4 = triangle_signed_area(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 and ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0:
        return True

    def on_seg(a, b, c, d):
        # c collinear with ab and inside its bounding box
        return d == 0 and min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    return on_seg(q1, q2, p1, d1) or on_seg(q1, q2, p2, d2) or on_seg(p1, p2, q1, d3) or on_seg(p1, p2, q2, d4)


class Polygon:
    """Simple closed polygon, stored counterclockwise.

    Parameters
    ----------
    vertices : array_like, shape (k, 2)
        Vertex list; the closing edge from the last vertex back to the first
        is implicit.  Clockwise input is reversed.

    Raises
    ------
    GeometryError
        Fewer than three vertices, repeated consecutive vertices, non-finite
        coordinates, zero area or self-intersection.
    """

    def __init__(self, vertices):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError("vertices must have shape (k, 2)")
        if len(v) >= 2 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise GeometryError("a polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon vertices must be finite")
        if np.any(np.all(v == np.roll(v, -1, axis=0), axis=1)):
            raise GeometryError("polygon has repeated consecutive vertices")
        area = _shoelace(v)
        if area == 0.0:
            raise GeometryError("polygon has zero area")
        self.reversed = area < 0
        if self.reversed:
            v = v[::-1].copy()
        v.setflags(write=False)
        self.vertices = v
        self._check_simple()

    def _check_simple(self) -> None:
        v = self.vertices
        k = len(v)
        for i in range(k):
            p1, p2 = v[i], v[(i + 1) % k]
            for j in range(i + 1, k):
                # adjacent edges share a vertex by construction
                if j == i + 1 or (i == 0 and j == k - 1):
                    continue
                if _segments_intersect(p1, p2, v[j], v[(j + 1) % k]):
                    raise GeometryError(f"polygon edges {i} and {j} intersect")

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        return f"Polygon({len(self)} vertices, area={self.area:.6g})"

    @property
    def area(self) -> float:
        return _shoelace(self.vertices)

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end points of every edge, each of shape ``(k, 2)``."""
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def diameter(self) -> float:
        x0, y0, x1, y1 = self.bbox()
        return float(np.hypot(x1 - x0, y1 - y0))


def polygon_signed_area(p) -> float:
    """Shoelace area; the sign encodes orientation.

    Accepts a raw vertex array so that clockwise input can be measured
    before a :class:`Polygon` normalizes it.
    """
    if isinstance(p, Polygon):
        return p.area
    return _shoelace(np.asarray(p, dtype=float))


def segment_distance(q, a, b):
    """Distance from points ``q`` (N, 2) to segments ``a -> b`` (k, 2).

    Returns an ``(N, k)`` array.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    ab = b - a
    len2 = np.einsum("ij,ij->i", ab, ab)
    aq = q[:, None, :] - a[None, :, :]
    t = np.einsum("nkj,kj->nk", aq, ab) / np.where(len2 > 0, len2, 1.0)
    np.clip(t, 0.0, 1.0, out=t)
    d = aq - t[..., None] * ab[None, :, :]
    return np.hypot(d[..., 0], d[..., 1])


def point_in_polygon(p: Polygon, q) -> np.ndarray:
    """Even/odd crossing test with a half-open edge rule.

    Boundary points are not treated specially here; use
    :func:`signed_distance` when on-boundary classification matters.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    a, b = p.edges
    qx = q[:, 0:1]
    qy = q[:, 1:2]
    ay, by = a[:, 1][None, :], b[:, 1][None, :]
    ax, bx = a[:, 0][None, :], b[:, 0][None, :]
    straddle = (ay <= qy) != (by <= qy)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = ax + (qy - ay) * (bx - ax) / (by - ay)
    crossings = np.sum(straddle & (qx < xcross), axis=1)
    return crossings % 2 == 1


def signed_distance(p: Polygon, q):
    """Distance to the boundary, negative strictly inside.

    Points within ``1e-12`` of an edge get exactly 0.  Scalar input gives a
    float, ``(N, 2)`` input an array.
    """
    arr = np.asarray(q, dtype=float)
    scalar = arr.ndim == 1
    pts = np.atleast_2d(arr)
    a, b = p.edges
    d = segment_distance(pts, a, b).min(axis=1)
    inside = point_in_polygon(p, pts)
    out = np.where(d <= ON_BOUNDARY_TOL, 0.0, np.where(inside, -d, d))
    return float(out[0]) if scalar else out


def scale_to_unit(p: Polygon) -> Polygon:
    """Uniformly scale and translate ``p`` into the unit square.

    The longer bounding-box side maps onto ``[0, 1]``; the aspect ratio is
    kept.
    """
    x0, y0, x1, y1 = p.bbox()
    extent = max(x1 - x0, y1 - y0)
    if extent <= 0:
        raise GeometryError("degenerate bounding box")
    return Polygon((p.vertices - np.array([x0, y0])) / extent)


def read_polygon(path) -> Polygon:
    """Read the plain-text polygon format (count line, then ``x y`` lines)."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        k = int(lines[0][0])
        v = np.array([[float(t[0]), float(t[1])] for t in lines[1 : k + 1]])
    except (IndexError, ValueError) as exc:
        raise GeometryError(f"malformed polygon file {path}: {exc}") from exc
    if len(v) != k:
        raise GeometryError(f"{path}: expected {k} vertices, found {len(v)}")
    return Polygon(v)


def write_polygon(path, p: Polygon) -> None:
    """Write the polygon format; shortest round-trip decimals, so reading back is exact."""
    rows = [str(len(p))] + [f"{float(x)!r} {float(y)!r}" for x, y in p.vertices]
    Path(path).write_text("\n".join(rows) + "\n")
