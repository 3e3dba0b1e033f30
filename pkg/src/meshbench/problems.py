"""Manufactured anisotropic diffusion problems ``-div(K grad u) = f``.

The three built-in problems use closed-form ``K``, ``u`` and their
derivatives; ``f`` is assembled from those closed forms, never from numeric
differentiation.  ``tools/derive_problems.py`` re-derives every expression
symbolically and checks it against this module.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["Problem", "builtin_problem", "tensor_eval", "rotated_tensor", "source_from_parts"]

Array = np.ndarray


@dataclass(frozen=True)
class Problem:
    """Diffusion tensor, exact solution and source on the unit square.

    ``K(x, y)`` returns ``(..., 2, 2)`` arrays; ``dK(x, y)`` returns the
    partials ``(d_x K11, d_y K12, d_x K12, d_y K22)`` stacked on the last
    axis.  ``dK`` may be ``None`` for user problems, in which case central
    differences are used wherever it is needed.
    """

    name: str
    K: Callable[[Array, Array], Array]
    u_exact: Callable[[Array, Array], Array]
    f: Callable[[Array, Array], Array]
    dK: Callable[[Array, Array], Array] | None = None

    def g(self, x, y):
        """Dirichlet data: the exact solution."""
        return self.u_exact(x, y)

    def dK_or_numeric(self, x, y, h: float = 1e-6) -> Array:
        if self.dK is not None:
            return self.dK(x, y)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        kx = (self.K(x + h, y) - self.K(x - h, y)) / (2 * h)
        ky = (self.K(x, y + h) - self.K(x, y - h)) / (2 * h)
        return np.stack([kx[..., 0, 0], ky[..., 0, 1], kx[..., 0, 1], ky[..., 1, 1]], axis=-1)


def tensor_eval(prob: Problem, x, y) -> Array:
    """``K`` at one or many points, checked symmetric positive definite."""
    k = np.asarray(prob.K(np.asarray(x, dtype=float), np.asarray(y, dtype=float)))
    if not np.allclose(k[..., 0, 1], k[..., 1, 0], rtol=0, atol=1e-14):
        raise ValueError(f"{prob.name}: K is not symmetric")
    det = k[..., 0, 0] * k[..., 1, 1] - k[..., 0, 1] ** 2
    if np.any(k[..., 0, 0] <= 0) or np.any(det <= 0):
        raise ValueError(f"{prob.name}: K is not positive definite")
    return k


def _pack(k11, k12, k22) -> Array:
    k11, k12, k22 = np.broadcast_arrays(k11, k12, k22)
    return np.stack([np.stack([k11, k12], -1), np.stack([k12, k22], -1)], -2)


def rotated_tensor(theta: float, d1, d2, d1x, d1y, d2x, d2y):
    """Entries and partials of ``P^T diag(d1, d2) P`` for a rotation ``P`` by ``theta``.

    Returns ``(K, dK)`` in the layout used by :class:`Problem`.
    """
    c, s = np.cos(theta), np.sin(theta)
    k11 = c * c * d1 + s * s * d2
    k12 = c * s * (d1 - d2)
    k22 = s * s * d1 + c * c * d2
    dk = np.stack(
        np.broadcast_arrays(
            c * c * d1x + s * s * d2x,
            c * s * (d1y - d2y),
            c * s * (d1x - d2x),
            s * s * d1y + c * c * d2y,
        ),
        axis=-1,
    )
    return _pack(k11, k12, k22), dk


def source_from_parts(k: Array, dk: Array, ux, uy, uxx, uxy, uyy) -> Array:
    """``-div(K grad u)`` expanded by the product rule."""
    return -(
        k[..., 0, 0] * uxx
        + 2 * k[..., 0, 1] * uxy
        + k[..., 1, 1] * uyy
        + (dk[..., 0] + dk[..., 1]) * ux
        + (dk[..., 2] + dk[..., 3]) * uy
    )


def _problem1() -> Problem:
    def K(x, y):
        z = np.zeros(np.broadcast(x, y).shape)
        return _pack(z + 1.0, z, z + 1.0)

    def dK(x, y):
        return np.zeros(np.broadcast(x, y).shape + (4,))

    def u(x, y):
        return 2.0 * np.exp(2.0 * x + y)

    def f(x, y):
        return -10.0 * np.exp(2.0 * x + y)

    return Problem("problem-1", K, u, f, dK)


def _sine_derivatives(x, y):
    px, py = np.pi * x, np.pi * y
    sx, cx, sy, cy = np.sin(px), np.cos(px), np.sin(py), np.cos(py)
    pi2 = np.pi * np.pi
    return (np.pi * cx * sy, np.pi * sx * cy, -pi2 * sx * sy, pi2 * cx * cy, -pi2 * sx * sy)


def _sine(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def _rotated_problem(name, theta, diag) -> Problem:
    def parts(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return rotated_tensor(theta, *diag(x, y))

    def K(x, y):
        return parts(x, y)[0]

    def dK(x, y):
        return parts(x, y)[1]

    def f(x, y):
        k, dk = parts(x, y)
        return source_from_parts(k, dk, *_sine_derivatives(x, y))

    return Problem(name, K, _sine, f, dK)


def _diag2(x, y):
    return (1 + 2 * x**2 + y**2, 1 + x**2 + 2 * y**2, 4 * x, 2 * y, 2 * x, 4 * y)


def _diag3(x, y):
    return (
        1 + 2 * x**2 + y**2 + y**5,
        1 + x**2 + 2 * y**2 + x**3,
        4 * x,
        2 * y + 5 * y**4,
        2 * x + 3 * x**2,
        4 * y,
    )


def builtin_problem(pid: int) -> Problem:
    """Problem 1, 2 or 3 of the comparison study.

    1. ``K = I``, ``u = 2 exp(2x + y)``.
    2. ``K = P^T D P`` with a pi/8 rotation and
       ``D = diag(1 + 2x^2 + y^2, 1 + x^2 + 2y^2)``, ``u = sin(pi x) sin(pi y)``.
    3. As 2 with a pi/4 rotation, ``y^5`` added to ``D11`` and ``x^3`` to ``D22``.
    """
    if pid == 1:
        return _problem1()
    if pid == 2:
        return _rotated_problem("problem-2", np.pi / 8, _diag2)
    if pid == 3:
        return _rotated_problem("problem-3", np.pi / 4, _diag3)
    raise ValueError(f"unknown problem id {pid!r}; expected 1, 2 or 3")
