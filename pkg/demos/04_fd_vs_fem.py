"""
Finite differences on a structured grid against P1 elements
===========================================================

One region, one anisotropic problem, two discretizations with comparable
numbers of unknowns.  Errors use the same discrete L2 norm: nodal values
weighted by quarter-cell areas for the grid, centroid values weighted by
element areas for the mesh.
"""
from meshbench import builtin_problem, data_path, distribute_boundary, optimize_grid, read_polygon, scale_to_unit
from meshbench import solve_fd, solve_fem
from meshbench.report import empirical_order, fd_error, fem_error
from meshbench.triangulation import DistMeshParams, distmesh_generate, half_average_diagonal

poly = scale_to_unit(read_polygon(data_path("lake.poly")))
prob = builtin_problem(2)  # rotated, spatially varying K; u = sin(pi x) sin(pi y)
print(f"lake, {prob.name}")

rows = []
for size in (21, 41):
    grid = optimize_grid(distribute_boundary(poly, [0, 8, 14, 18], size, size)).grid
    u, info = solve_fd(grid, prob)
    e_fd = fd_error(grid, u, prob)

    mesh = distmesh_generate(poly, DistMeshParams(half_average_diagonal(grid)))
    v, _ = solve_fem(mesh, prob)
    e_fem = fem_error(mesh, v, prob)
    rows.append((size, info["unknowns"], e_fd, mesh.n_interior, e_fem))

print(f"{'size':>5} {'FD unknowns':>12} {'FD error':>10} {'FEM unknowns':>13} {'FEM error':>10}")
for size, nu, e1, nv, e2 in rows:
    print(f"{size:5d} {nu:12d} {e1:10.3e} {nv:13d} {e2:10.3e}")
print(f"FD order  {empirical_order(rows[0][2], rows[1][2], 21, 41):.2f}")
print(f"FEM order {empirical_order(rows[0][4], rows[1][4], 21, 41):.2f}")
