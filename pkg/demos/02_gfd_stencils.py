"""
Nine-point stencils from moment conditions
==========================================

At each interior node the 3x3 block of neighbours gives nine coefficients
and six conditions: the weighted sum must reproduce the diffusion operator
on 1, x, y, x^2, xy and y^2.  The remaining three degrees of freedom are
fixed by a minimum-norm choice.  Two choices are available; only one of
them gives a matrix Gauss-Seidel can iterate on.
"""
import numpy as np

from meshbench import builtin_problem, distribute_boundary, optimize_grid, solve_fd
from meshbench.geometry import Polygon
from meshbench.gfd import OFFSETS, operator_moments, stencil_coefficients
from meshbench.report import empirical_order, fd_error

# uniform block of spacing 1 around the origin, K = I
block = np.array(OFFSETS, dtype=float)
moments = operator_moments(np.eye(2), np.zeros(4))
print("moments for -laplace:", moments)

for tie in ("min-norm", "neighbors"):
    gamma = stencil_coefficients(block, moments, tie_break=tie).gamma
    print(f"\n{tie} coefficients (rows are y = -1, 0, 1):")
    print(np.round(gamma.reshape(3, 3), 4))
    u = block[:, 0] ** 2 + block[:, 1] ** 2
    print(f"applied to x^2 + y^2: {gamma @ u:+.12f}   (exact -4)")

# second order on the unit square for a manufactured solution
square = Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
prob = builtin_problem(1)
errors = []
for size in (11, 21, 41):
    grid = optimize_grid(distribute_boundary(square, [0, 1, 2, 3], size, size)).grid
    u, info = solve_fd(grid, prob)
    errors.append(fd_error(grid, u, prob))
    print(f"\n{size}x{size}: {info['unknowns']} unknowns, {info['iterations']} Gauss-Seidel sweeps, "
          f"error {errors[-1]:.3e}", end="")
print()
for (e0, n0), (e1, n1) in zip(zip(errors, (11, 21)), zip(errors[1:], (21, 41))):
    print(f"order {n0}->{n1}: {empirical_order(e0, e1, n0, n1):.2f}")
