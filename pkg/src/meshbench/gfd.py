"""Generalized finite differences for ``-div(K grad u) = f`` on structured grids.

Each interior node uses the 3x3 block of nodes around it.  Its coefficients
``gamma`` make ``sum(gamma * u(p))`` reproduce the operator exactly on every
polynomial of total degree two; of the three-parameter family of such
stencils the one with smallest Euclidean norm is taken (see
:func:`stencil_coefficients` for the two norms on offer).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp

from .grid import StructuredGrid, is_convex
from .problems import Problem

__all__ = [
    "StencilError",
    "SolverError",
    "Stencil",
    "SparseSystem",
    "operator_moments",
    "stencil_coefficients",
    "grid_stencils",
    "assemble_fd_system",
    "gauss_seidel_solve",
    "solve_fd",
]

# offsets of the 3x3 block, i fastest; position 4 is the center
OFFSETS = [(di, dj) for dj in (-1, 0, 1) for di in (-1, 0, 1)]
CENTER = 4


class StencilError(ValueError):
    """The 3x3 block cannot support a degree-two exact stencil."""


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Stencil:
    center: tuple[int, int]
    points: np.ndarray
    gamma: np.ndarray


@dataclass
class SparseSystem:
    """Linear system ``A x = b`` over the unknown (interior) nodes."""

    A: sp.csr_matrix
    rhs: np.ndarray

    @property
    def dimension(self) -> int:
        return self.A.shape[0]

    def dump(self, path) -> None:
        """Write ``row col value`` lines (0-based), then ``rhs`` rows as ``row value``."""
        coo = self.A.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines = [f"{self.dimension} {coo.nnz}"]
        lines += [f"{r} {c} {v:.17g}" for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order])]
        lines += [f"{i} {v:.17g}" for i, v in enumerate(self.rhs)]
        Path(path).write_text("\n".join(lines) + "\n")


def operator_moments(K, dK) -> np.ndarray:
    """Values of ``-div(K grad .)`` at the center on ``1, xi, eta, xi^2, xi*eta, eta^2``.

    Parameters
    ----------
    K : array_like, shape (..., 2, 2)
    dK : array_like, shape (..., 4)
        ``(d_x K11, d_y K12, d_x K12, d_y K22)``.
    """
    K = np.asarray(K, dtype=float)
    dK = np.asarray(dK, dtype=float)
    if not np.allclose(K[..., 0, 1], K[..., 1, 0], rtol=1e-12, atol=1e-14):
        raise ValueError("K must be symmetric")
    det = K[..., 0, 0] * K[..., 1, 1] - K[..., 0, 1] * K[..., 1, 0]
    if np.any(K[..., 0, 0] <= 0) or np.any(det <= 0):
        raise ValueError("K must be positive definite")
    zero = np.zeros(K.shape[:-2])
    return np.stack(
        [
            zero,
            -(dK[..., 0] + dK[..., 1]),
            -(dK[..., 2] + dK[..., 3]),
            -2 * K[..., 0, 0],
            -2 * K[..., 0, 1],
            -2 * K[..., 1, 1],
        ],
        axis=-1,
    )


def _moment_matrix(points: np.ndarray, scale: np.ndarray) -> np.ndarray:
    rel = (points - points[..., CENTER : CENTER + 1, :]) / scale[..., None, None]
    xi, eta = rel[..., 0], rel[..., 1]
    return np.stack([np.ones_like(xi), xi, eta, xi * xi, xi * eta, eta * eta], axis=-2)


def _solve_min_norm(points, moments, tie_break):
    points = np.asarray(points, dtype=float)
    moments = np.asarray(moments, dtype=float)
    # rows scaled by powers of h: the solution set, hence the min-norm point, is unchanged
    h = np.sqrt(np.mean(np.sum((points - points[..., CENTER : CENTER + 1, :]) ** 2, axis=-1), axis=-1))
    h = np.where(h > 0, h, 1.0)
    M = _moment_matrix(points, h)
    powers = np.array([0, 1, 1, 2, 2, 2])
    b = moments / h[..., None] ** powers
    if tie_break == "min-norm":
        cols = np.arange(9)
        rows = slice(0, 6)
    elif tie_break == "neighbors":
        cols = np.array([k for k in range(9) if k != CENTER])
        rows = slice(1, 6)
    else:
        raise ValueError(f"unknown tie_break {tie_break!r}")
    Ms = M[..., rows, :][..., cols]
    bs = b[..., rows]
    u, s, vt = np.linalg.svd(Ms, full_matrices=False)
    rank_ok = s[..., -1] > 1e-10 * s[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.einsum("...ji,...j->...i", u, bs) / s
    sol = np.einsum("...ij,...i->...j", vt, np.where(rank_ok[..., None], coef, 0.0))
    gamma = np.zeros(points.shape[:-1])
    gamma[..., cols] = sol
    if tie_break == "neighbors":
        gamma[..., CENTER] = b[..., 0] - sol.sum(axis=-1)
    return gamma, rank_ok


def stencil_coefficients(points, moments, tie_break: str = "neighbors", center=(0, 0)) -> Stencil:
    """Degree-two exact coefficients on a 3x3 block.

    Parameters
    ----------
    points : array_like, shape (9, 2)
        The block in ``OFFSETS`` order; ``points[4]`` is the center.
    moments : array_like, shape (6,)
        Output of :func:`operator_moments`.
    tie_break : {"neighbors", "min-norm"}
        ``"min-norm"`` returns the minimum-norm solution of the full 6x9
        moment system.  ``"neighbors"`` minimizes the norm of the eight
        off-center coefficients only and fixes the center weight by
        consistency; on a uniform grid with ``K = I`` this gives the
        negative-off-diagonal nine-point Laplacian instead of an indefinite
        one.

    Raises
    ------
    StencilError
        If the block does not determine all six moments (e.g. collinear).
    """
    gamma, ok = _solve_min_norm(points, moments, tie_break)
    if not ok:
        raise StencilError(f"degenerate 3x3 block around node {tuple(center)} at {np.asarray(points)[CENTER]}")
    return Stencil(tuple(center), np.asarray(points, dtype=float), gamma)


def _blocks(g: StructuredGrid) -> np.ndarray:
    p = g.points
    n, m = g.n, g.m
    return np.stack([p[1 + di : n - 1 + di, 1 + dj : m - 1 + dj] for di, dj in OFFSETS], axis=2)


def grid_stencils(g: StructuredGrid, prob: Problem, tie_break: str = "neighbors") -> np.ndarray:
    """Coefficients for every interior node, shape ``(n-2, m-2, 9)``."""
    blocks = _blocks(g)
    c = blocks[:, :, CENTER]
    x, y = c[..., 0], c[..., 1]
    moments = operator_moments(prob.K(x, y), prob.dK_or_numeric(x, y, 1e-6 * _diameter(g)))
    gamma, ok = _solve_min_norm(blocks, moments, tie_break)
    if not np.all(ok):
        i, j = np.argwhere(~ok)[0]
        raise StencilError(f"degenerate 3x3 block around node ({i + 1}, {j + 1}) at {c[i, j]}")
    return gamma


def _diameter(g: StructuredGrid) -> float:
    lo = g.points.reshape(-1, 2).min(axis=0)
    hi = g.points.reshape(-1, 2).max(axis=0)
    return float(np.hypot(*(hi - lo)))


def interior_index(n: int, m: int) -> np.ndarray:
    """Unknown number of every node (``-1`` on the boundary), j-major."""
    idx = -np.ones((n, m), dtype=np.int64)
    ii, jj = np.meshgrid(np.arange(n - 2), np.arange(m - 2), indexing="ij")
    idx[1:-1, 1:-1] = jj * (n - 2) + ii
    return idx


def assemble_fd_system(g: StructuredGrid, prob: Problem, tie_break: str = "neighbors") -> SparseSystem:
    """One equation per interior node, unknowns ordered j-major.

    Boundary neighbors contribute ``-gamma * g(node)`` to the right-hand
    side.
    """
    if not is_convex(g):
        raise StencilError("finite differences need a convex grid")
    n, m = g.n, g.m
    gamma = grid_stencils(g, prob, tie_break)
    idx = interior_index(n, m)
    row_ids = idx[1:-1, 1:-1]
    c = g.points[1:-1, 1:-1]
    rhs = np.asarray(prob.f(c[..., 0], c[..., 1]), dtype=float).copy()
    rows, cols, vals = [], [], []
    for k, (di, dj) in enumerate(OFFSETS):
        nb = idx[1 + di : n - 1 + di, 1 + dj : m - 1 + dj]
        gk = gamma[..., k]
        inner = nb >= 0
        rows.append(row_ids[inner])
        cols.append(nb[inner])
        vals.append(gk[inner])
        if np.any(~inner):
            bp = g.points[1 + di : n - 1 + di, 1 + dj : m - 1 + dj][~inner]
            rhs[~inner] -= gk[~inner] * prob.g(bp[:, 0], bp[:, 1])
    dim = (n - 2) * (m - 2)
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    A.sort_indices()
    b = np.zeros(dim)
    b[row_ids.ravel()] = rhs.ravel()
    return SparseSystem(A, b)


@numba.njit(cache=True)
def _gs_kernel(indptr, indices, data, b, x, tol, max_iters):
    nrow = len(b)
    bnorm = np.sqrt(np.sum(b * b))
    if bnorm == 0.0:
        bnorm = 1.0
    for it in range(1, max_iters + 1):
        for r in range(nrow):
            s = b[r]
            diag = 0.0
            for k in range(indptr[r], indptr[r + 1]):
                c = indices[k]
                if c == r:
                    diag = data[k]
                else:
                    s -= data[k] * x[c]
            x[r] = s / diag
        res = 0.0
        for r in range(nrow):
            s = b[r]
            for k in range(indptr[r], indptr[r + 1]):
                s -= data[k] * x[indices[k]]
            res += s * s
        rel = np.sqrt(res) / bnorm
        if not np.isfinite(rel):
            return it, rel
        if rel < tol:
            return it, rel
    return max_iters, rel


def gauss_seidel_solve(s: SparseSystem, tol: float = 1e-10, max_iters: int = 1_000_000, x0=None):
    """Classic forward Gauss-Seidel sweeps in unknown order.

    Returns
    -------
    x : ndarray
    iterations : int
    converged : bool
        False when ``max_iters`` sweeps did not bring the relative residual
        ``||b - Ax|| / ||b||`` under ``tol`` or the iteration diverged.

    Raises
    ------
    SolverError
        On a zero diagonal entry.
    """
    A = s.A.tocsr()
    diag = A.diagonal()
    if np.any(diag == 0):
        raise SolverError(f"zero diagonal entry in row {int(np.argmax(diag == 0))}")
    x = np.zeros(s.dimension) if x0 is None else np.array(x0, dtype=float)
    b = np.asarray(s.rhs, dtype=float)
    if not np.any(b):
        return np.zeros_like(b), 0, True
    it, rel = _gs_kernel(
        A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data.astype(float), b, x, tol, int(max_iters)
    )
    return x, int(it), bool(np.isfinite(rel) and rel < tol)


def solve_fd(g: StructuredGrid, prob: Problem, solver: str = "gauss-seidel", tol: float = 1e-10,
             max_iters: int = 1_000_000, tie_break: str = "neighbors"):
    """Assemble and solve; returns ``(u, info)`` with ``u`` of shape ``(n, m)``.

    ``solver="gauss-seidel"`` falls back to the sparse direct solver when the
    sweeps do not converge; ``info["fallback"]`` records that.
    """
    from .fem import sparse_direct_solve

    system = assemble_fd_system(g, prob, tie_break)
    info = {"unknowns": system.dimension, "iterations": 0, "solver": solver, "fallback": False}
    if solver == "gauss-seidel":
        x, it, ok = gauss_seidel_solve(system, tol, max_iters)
        info["iterations"] = it
        if not ok:
            x = sparse_direct_solve(system)
            info["fallback"] = True
    elif solver == "direct":
        x = sparse_direct_solve(system)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    u = np.asarray(prob.g(g.x, g.y), dtype=float).copy()
    u[1:-1, 1:-1] = x.reshape(g.m - 2, g.n - 2).T
    return u, info
