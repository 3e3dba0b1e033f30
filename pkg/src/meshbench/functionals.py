"""Variational grid functionals and the convex-grid optimizer.

The area term penalizes the corner-triangle areas ``alpha`` of every cell
through ``phi(alpha) = sqrt(omega**2 + alpha**2) - alpha``, which tends to
the hinge ``2*max(-alpha, 0)`` as ``omega -> 0``.  The length term is the
mean squared edge length.  Both are averaged over their term counts so
that ``sigma`` keeps the same meaning on every grid size.

Gradients are returned for the interior nodes only, with shape
``(n-2, m-2, 2)``; boundary nodes never move.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numba
import numpy as np

from .grid import BoundarySpec, StructuredGrid, cell_triangle_areas, default_eps, is_convex, transfinite_init

__all__ = [
    "FunctionalConfig",
    "OptimizeResult",
    "barrier",
    "barrier_derivative",
    "length_functional",
    "area_functional",
    "combined_functional",
    "optimize_grid",
]

log = logging.getLogger(__name__)


def barrier(alpha, omega):
    """``sqrt(omega^2 + alpha^2) - alpha``; strictly decreasing and convex.

    For ``alpha > 0`` the equivalent ``omega^2 / (sqrt(omega^2 + alpha^2) + alpha)``
    is used, which avoids cancellation once ``alpha >> omega``.
    """
    alpha = np.asarray(alpha, dtype=float)
    h = np.hypot(omega, alpha)
    return np.where(alpha > 0, omega * omega / (h + np.abs(alpha)), h - alpha)


def barrier_derivative(alpha, omega):
    """``alpha / sqrt(omega^2 + alpha^2) - 1``, evaluated as ``-barrier / hypot``."""
    return -barrier(alpha, omega) / np.hypot(omega, alpha)


def _points(g) -> np.ndarray:
    return g.points if isinstance(g, StructuredGrid) else np.asarray(g)


def _length_terms(p: np.ndarray):
    eh = p[1:, :] - p[:-1, :]
    ev = p[:, 1:] - p[:, :-1]
    count = eh.shape[0] * eh.shape[1] + ev.shape[0] * ev.shape[1]
    value = (np.sum(eh * eh) + np.sum(ev * ev)) / count
    grad = np.zeros_like(p)
    grad[1:, :] += eh
    grad[:-1, :] -= eh
    grad[:, 1:] += ev
    grad[:, :-1] -= ev
    grad *= 2.0 / count
    return value, grad


def _area_terms(p: np.ndarray, omega: float):
    alpha = cell_triangle_areas(p)
    count = alpha.size
    value = np.sum(barrier(alpha, omega)) / count
    w = 0.5 * barrier_derivative(alpha, omega) / count

    a = p[:-1, :-1]
    b = p[1:, :-1]
    c = p[1:, 1:]
    d = p[:-1, 1:]
    ga = np.zeros_like(a)
    gb = np.zeros_like(a)
    gc = np.zeros_like(a)
    gd = np.zeros_like(a)

    def tri(wk, o, q, r, go, gq, gr):
        # d(alpha)/d(vertex) for triangle (o, q, r), times 2
        wk = wk[..., None]
        go += wk * np.stack([q[..., 1] - r[..., 1], r[..., 0] - q[..., 0]], axis=-1)
        gq += wk * np.stack([r[..., 1] - o[..., 1], o[..., 0] - r[..., 0]], axis=-1)
        gr += wk * np.stack([o[..., 1] - q[..., 1], q[..., 0] - o[..., 0]], axis=-1)

    tri(w[..., 0], a, b, d, ga, gb, gd)
    tri(w[..., 1], b, c, a, gb, gc, ga)
    tri(w[..., 2], c, d, b, gc, gd, gb)
    tri(w[..., 3], d, a, c, gd, ga, gc)

    grad = np.zeros_like(p)
    grad[:-1, :-1] += ga
    grad[1:, :-1] += gb
    grad[1:, 1:] += gc
    grad[:-1, 1:] += gd
    return value, grad


def length_functional(g: StructuredGrid):
    """Mean squared length of all horizontal and vertical grid edges.

    Returns
    -------
    value : float
    gradient : ndarray, shape (n-2, m-2, 2)
    """
    value, grad = _length_terms(_points(g))
    return float(value), grad[1:-1, 1:-1]


def area_functional(g: StructuredGrid, omega: float):
    """Mean barrier value over all ``4(m-1)(n-1)`` corner triangles."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    value, grad = _area_terms(_points(g), omega)
    return float(value), grad[1:-1, 1:-1]


def combined_functional(g: StructuredGrid, omega: float, sigma: float = 0.5, omega_ref: float | None = None):
    """``sigma * (omega_ref/omega) * area + (1 - sigma) * length`` and its gradient.

    ``omega_ref`` defaults to ``omega``, giving the plain convex combination.
    The optimizer passes its starting ``omega`` so that every shrink of
    ``omega`` also stiffens the area term relative to the length term.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ValueError("sigma must lie in [0, 1]")
    p = _points(g)
    sv, sg = _area_terms(p, omega)
    lv, lg = _length_terms(p)
    ws = sigma * (1.0 if omega_ref is None else omega_ref / omega)
    return float(ws * sv + (1 - sigma) * lv), (ws * sg + (1 - sigma) * lg)[1:-1, 1:-1]


@numba.njit(cache=True)
def _combined_kernel(p, omega, w_area, w_length, grad):
    """Fused value and gradient of ``w_area * S + w_length * L``; fills ``grad``.

    Returns the value and the smallest corner-triangle area.
    """
    n, m = p.shape[0], p.shape[1]
    grad[:] = 0.0
    n_tri = 4 * (n - 1) * (m - 1)
    n_edge = (n - 1) * m + n * (m - 1)
    sa = w_area / n_tri
    sl = w_length / n_edge
    # compensated (Kahan) sums: near convergence the line search compares
    # values that differ only in the last few bits
    total_a = 0.0
    comp_a = 0.0
    total_l = 0.0
    comp_l = 0.0
    amin = np.inf
    for i in range(n):
        for j in range(m):
            if i + 1 < n:
                ex = p[i + 1, j, 0] - p[i, j, 0]
                ey = p[i + 1, j, 1] - p[i, j, 1]
                t = ex * ex + ey * ey - comp_l
                u = total_l + t
                comp_l = (u - total_l) - t
                total_l = u
                grad[i + 1, j, 0] += 2 * sl * ex
                grad[i + 1, j, 1] += 2 * sl * ey
                grad[i, j, 0] -= 2 * sl * ex
                grad[i, j, 1] -= 2 * sl * ey
            if j + 1 < m:
                ex = p[i, j + 1, 0] - p[i, j, 0]
                ey = p[i, j + 1, 1] - p[i, j, 1]
                t = ex * ex + ey * ey - comp_l
                u = total_l + t
                comp_l = (u - total_l) - t
                total_l = u
                grad[i, j + 1, 0] += 2 * sl * ex
                grad[i, j + 1, 1] += 2 * sl * ey
                grad[i, j, 0] -= 2 * sl * ex
                grad[i, j, 1] -= 2 * sl * ey
    ci = np.empty(4, np.int64)
    cj = np.empty(4, np.int64)
    for i in range(n - 1):
        for j in range(m - 1):
            # A, B, C, D counterclockwise
            ci[0], cj[0] = i, j
            ci[1], cj[1] = i + 1, j
            ci[2], cj[2] = i + 1, j + 1
            ci[3], cj[3] = i, j + 1
            for k in range(4):
                o = k
                q = (k + 1) % 4
                r = (k + 3) % 4
                ox, oy = p[ci[o], cj[o], 0], p[ci[o], cj[o], 1]
                qx, qy = p[ci[q], cj[q], 0], p[ci[q], cj[q], 1]
                rx, ry = p[ci[r], cj[r], 0], p[ci[r], cj[r], 1]
                alpha = 0.5 * ((qx - ox) * (ry - oy) - (qy - oy) * (rx - ox))
                amin = min(amin, alpha)
                hyp = np.sqrt(omega * omega + alpha * alpha)
                phi = omega * omega / (hyp + alpha) if alpha > 0 else hyp - alpha
                t = phi - comp_a
                u = total_a + t
                comp_a = (u - total_a) - t
                total_a = u
                w = -0.5 * sa * phi / hyp
                grad[ci[o], cj[o], 0] += w * (qy - ry)
                grad[ci[o], cj[o], 1] += w * (rx - qx)
                grad[ci[q], cj[q], 0] += w * (ry - oy)
                grad[ci[q], cj[q], 1] += w * (ox - rx)
                grad[ci[r], cj[r], 0] += w * (oy - qy)
                grad[ci[r], cj[r], 1] += w * (qx - ox)
    return sa * total_a + sl * total_l, amin


@dataclass
class FunctionalConfig:
    """Optimizer settings.

    ``omega0=None`` means the mean absolute corner-triangle area of the initial grid.
    ``inner_tol`` is scaled by ``1 + |F(G0)|`` and by the mean gradient
    magnitude of the starting grid.
    """

    sigma: float = 0.5
    omega0: float | None = None
    omega_shrink: float = 0.5
    max_omega_updates: int = 20
    inner_tol: float = 1e-6
    inner_max_iters: int = 2000
    history: int = 10
    armijo: float = 1e-4

    def __post_init__(self):
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError("sigma must lie in [0, 1]")
        if self.omega0 is not None and not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if not 0.0 < self.omega_shrink < 1.0:
            raise ValueError("omega_shrink must lie in (0, 1)")
        if self.max_omega_updates < 0 or self.inner_max_iters < 1:
            raise ValueError("iteration limits must be non-negative")


@dataclass
class OptimizeResult:
    """Outcome of :func:`optimize_grid`.

    ``trace`` holds one ``(iteration, F, |grad|_inf, min alpha, omega)``
    tuple per inner iteration, with the iteration counter restarting at
    every ``omega`` level.
    """

    grid: StructuredGrid
    convex: bool
    omega_updates_used: int
    final_functional_value: float
    final_gradient_norm: float
    min_alpha: float
    omega: float
    trace: list = field(default_factory=list, repr=False)


def _lbfgs(fun, x0, tol, max_iters, history, c1, step0, trace, omega):
    """Limited-memory BFGS with backtracking Armijo line search.

    Every accepted step strictly decreases ``fun``.
    """
    x = x0.copy()
    f, g, amin = fun(x)
    s_hist: deque = deque(maxlen=history)
    y_hist: deque = deque(maxlen=history)
    for it in range(max_iters):
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if trace is not None:
            trace.append((it, f, gnorm, amin, omega))
        if gnorm <= tol:
            break
        # two-loop recursion
        q = g.copy()
        coefs = []
        for s, y in reversed(list(zip(s_hist, y_hist))):
            rho = 1.0 / np.dot(y, s)
            a = rho * np.dot(s, q)
            q -= a * y
            coefs.append((rho, a, s, y))
        if s_hist:
            s, y = s_hist[-1], y_hist[-1]
            q *= np.dot(s, y) / np.dot(y, y)
        else:
            q *= step0 / max(gnorm, 1e-300)
        for rho, a, s, y in reversed(coefs):
            b = rho * np.dot(y, q)
            q += (a - b) * s
        d = -q
        slope = float(np.dot(g, d))
        if not slope < 0:
            s_hist.clear()
            y_hist.clear()
            d = -g * (step0 / max(gnorm, 1e-300))
            slope = float(np.dot(g, d))

        t = 1.0
        for _ in range(60):
            x_new = x + t * d
            f_new, g_new, amin_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + c1 * t * slope:
                break
            t *= 0.5
        else:
            break
        if not np.isfinite(f_new):
            raise FloatingPointError("functional became non-finite")
        assert f_new <= f, "line search accepted an ascent step"
        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
        x, f, g, amin = x_new, f_new, g_new, amin_new
    return x, f, g


def optimize_grid(b: BoundarySpec, cfg: FunctionalConfig | None = None, init: StructuredGrid | None = None) -> OptimizeResult:
    """Minimize the combined functional, shrinking ``omega`` until convex.

    Parameters
    ----------
    b : BoundarySpec
        Fixed boundary nodes.
    cfg : FunctionalConfig, optional
    init : StructuredGrid, optional
        Starting grid; defaults to the transfinite interpolation of ``b``.

    Returns
    -------
    OptimizeResult
        The first convex minimizer found, or the minimizer with the largest
        minimum corner area when no ``omega`` produced a convex grid.
    """
    cfg = cfg or FunctionalConfig()
    g0 = init if init is not None else transfinite_init(b)
    if init is not None:
        np.testing.assert_array_equal(init.boundary().nodes, b.nodes)
    shape = g0.interior().shape
    pts = g0.points.copy()
    eps = default_eps(g0)

    alpha0 = cell_triangle_areas(g0)
    omega = cfg.omega0 if cfg.omega0 is not None else float(np.mean(np.abs(alpha0)))
    if not omega > 0:
        raise ValueError("boundary encloses no area")
    omega_ref = omega

    full = np.empty_like(pts)

    def fun(xflat):
        pts[1:-1, 1:-1] = xflat.reshape(shape)
        v, amin = _combined_kernel(pts, omega, cfg.sigma * omega_ref / omega, 1.0 - cfg.sigma, full)
        return v, full[1:-1, 1:-1].ravel().copy(), amin

    x = g0.interior().ravel().copy()
    f0, grad0, _ = fun(x)
    if not np.isfinite(f0):
        raise FloatingPointError("functional is non-finite on the initial grid")
    # typical per-node move for the first steepest-descent step
    h = np.sqrt(abs(b.polygon().area) / max(g0.n_cells, 1))
    step0 = 0.1 * h
    tol = cfg.inner_tol * (1.0 + abs(f0)) * max(float(np.mean(np.abs(grad0))), 1e-300) if x.size else 0.0

    trace: list = []
    best = None
    updates = 0
    while True:
        x, f, g = _lbfgs(fun, x, tol, cfg.inner_max_iters, cfg.history, cfg.armijo, step0, trace, omega)
        pts[1:-1, 1:-1] = x.reshape(shape)
        grid = StructuredGrid(pts)
        amin = float(cell_triangle_areas(grid).min())
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        convex = is_convex(grid, eps)
        log.debug("omega=%.3e F=%.6e |g|=%.3e min alpha=%.3e", omega, f, gnorm, amin)
        if best is None or amin > best.min_alpha:
            best = OptimizeResult(grid, convex, updates, f, gnorm, amin, omega)
        if convex or updates >= cfg.max_omega_updates:
            break
        omega *= cfg.omega_shrink
        updates += 1
    best.omega_updates_used = updates
    best.trace = trace
    return best
