"""Linear (pyramid) triangular elements for ``-div(K grad u) = f``.

Dirichlet nodes are eliminated, so the unknowns are exactly the interior
mesh nodes.  Both ``K`` and ``f`` are sampled once per element at the
centroid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .gfd import SolverError, SparseSystem
from .problems import Problem

__all__ = [
    "ElementMatrix",
    "pyramid_gradient",
    "element_stiffness",
    "assemble_fem_system",
    "sparse_direct_solve",
    "cg_solve",
    "solve_fem",
]


@dataclass(frozen=True)
class ElementMatrix:
    k_local: np.ndarray
    f_local: np.ndarray


def _gradients(tri: np.ndarray):
    """Batched gradients for ``tri`` of shape ``(..., 3, 2)``; returns grads and areas."""
    p0, p1, p2 = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
    area = 0.5 * ((p1[..., 0] - p0[..., 0]) * (p2[..., 1] - p0[..., 1])
                  - (p1[..., 1] - p0[..., 1]) * (p2[..., 0] - p0[..., 0]))
    # grad phi_i = perp(p_{i+2} - p_{i+1}) / (2 area), rotated so it points at vertex i
    e = np.stack([p2 - p1, p0 - p2, p1 - p0], axis=-2)
    # callers reject non-positive areas, so silence the degenerate division here
    with np.errstate(divide="ignore", invalid="ignore"):
        grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * area[..., None, None])
    return grads, area


def pyramid_gradient(tri) -> np.ndarray:
    """Constant gradients of the three hat functions on a triangle.

    Returns an array of shape ``(3, 2)`` whose row ``i`` is the gradient of
    the linear function equal to 1 at vertex ``i`` and 0 at the others.
    """
    tri = np.asarray(tri, dtype=float)
    grads, area = _gradients(tri)
    if not area > 0:
        raise ValueError(f"triangle must have positive area, got {area}")
    return grads


def element_stiffness(tri, prob: Problem) -> ElementMatrix:
    """Centroid-quadrature stiffness matrix and load vector of one element."""
    tri = np.asarray(tri, dtype=float)
    grads, area = _gradients(tri)
    if not area > 0:
        raise ValueError(f"degenerate element with area {area}")
    cx, cy = tri.mean(axis=0)
    K = np.asarray(prob.K(cx, cy), dtype=float)
    k_local = area * grads @ K @ grads.T
    f_local = np.full(3, area * float(prob.f(cx, cy)) / 3.0)
    return ElementMatrix(k_local, f_local)


def assemble_fem_system(mesh, prob: Problem):
    """Global system over the interior nodes of ``mesh``.

    Returns
    -------
    system : SparseSystem
    unknown_nodes : ndarray
        Mesh node number of every unknown, in unknown order.
    """
    nodes = np.asarray(mesh.nodes, dtype=float)
    tris = np.asarray(mesh.triangles, dtype=np.int64)
    bnd = np.asarray(mesh.boundary_flags, dtype=bool)
    unknown_nodes = np.flatnonzero(~bnd)
    if unknown_nodes.size == 0:
        raise ValueError("mesh has no interior node")
    number = -np.ones(len(nodes), dtype=np.int64)
    number[unknown_nodes] = np.arange(unknown_nodes.size)

    tri = nodes[tris]
    grads, area = _gradients(tri)
    if np.any(area <= 0):
        raise ValueError(f"mesh has {int(np.sum(area <= 0))} non-positive triangles")
    cen = tri.mean(axis=1)
    K = np.asarray(prob.K(cen[:, 0], cen[:, 1]), dtype=float)
    ke = area[:, None, None] * np.einsum("eia,eab,ejb->eij", grads, K, grads)
    # symmetrize explicitly so that A == A.T holds bit for bit
    ke = 0.5 * (ke + ke.transpose(0, 2, 1))
    fe = np.repeat((area * prob.f(cen[:, 0], cen[:, 1]) / 3.0)[:, None], 3, axis=1)

    n_all = len(nodes)
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    K_all = sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(n_all, n_all))
    F_all = np.bincount(tris.ravel(), weights=fe.ravel(), minlength=n_all)

    gvals = np.zeros(n_all)
    bidx = np.flatnonzero(bnd)
    gvals[bidx] = prob.g(nodes[bidx, 0], nodes[bidx, 1])
    A = K_all[unknown_nodes][:, unknown_nodes].tocsr()
    A.sort_indices()
    rhs = F_all[unknown_nodes] - K_all[unknown_nodes][:, bidx] @ gvals[bidx]
    return SparseSystem(A, rhs), unknown_nodes


def sparse_direct_solve(s: SparseSystem) -> np.ndarray:
    """Sparse LU (SuperLU, COLAMD ordering); raises on a singular matrix."""
    A = sp.csc_matrix(s.A)
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SolverError(f"singular matrix: {exc}") from exc
    x = lu.solve(np.asarray(s.rhs, dtype=float))
    if not np.all(np.isfinite(x)):
        raise SolverError("direct solve produced non-finite values")
    return x


def cg_solve(s: SparseSystem, tol: float = 1e-12, max_iters: int | None = None):
    """Conjugate gradients for SPD systems; returns ``(x, iterations, converged)``."""
    A = s.A.tocsr()
    b = np.asarray(s.rhs, dtype=float)
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return x, 0, True
    r = b.copy()
    p = r.copy()
    rr = r @ r
    max_iters = max_iters or 10 * len(b)
    for it in range(1, max_iters + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            return x, it, False
        a = rr / pAp
        x += a * p
        r -= a * Ap
        rr_new = r @ r
        if np.sqrt(rr_new) < tol * bnorm:
            return x, it, True
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x, max_iters, False


def solve_fem(mesh, prob: Problem, solver: str = "direct", tol: float = 1e-12):
    """Assemble and solve; returns ``(u, info)`` with nodal values for every node."""
    system, unknown = assemble_fem_system(mesh, prob)
    info = {"unknowns": system.dimension, "iterations": 0, "solver": solver}
    if solver == "direct":
        x = sparse_direct_solve(system)
    elif solver == "cg":
        x, it, ok = cg_solve(system, tol)
        info["iterations"] = it
        if not ok:
            raise SolverError(f"conjugate gradients did not converge in {it} iterations")
    else:
        raise ValueError(f"unknown solver {solver!r}")
    nodes = np.asarray(mesh.nodes, dtype=float)
    u = np.asarray(prob.g(nodes[:, 0], nodes[:, 1]), dtype=float).copy()
    u[unknown] = x
    return u, info
