"""
Force-equilibrium triangulations, two ways
==========================================

DistMesh treats mesh edges as compressed bars and lets interior nodes move
until the forces balance, re-running Delaunay whenever nodes have moved
far enough.  The boundary is resampled once and held fixed.  Variant a
starts from a hexagonal lattice; variant b starts from the interior nodes of
a convex structured grid, with the bar length set to half its mean cell
diagonal.
"""
import numpy as np

from meshbench import data_path, distribute_boundary, optimize_grid, read_polygon, scale_to_unit
from meshbench.geometry import signed_distance
from meshbench.triangulation import (
    DistMeshParams,
    delaunay_violations,
    distmesh_generate,
    half_average_diagonal,
    triangle_quality,
)

poly = scale_to_unit(read_polygon(data_path("boot.poly")))
grid = optimize_grid(distribute_boundary(poly, [0, 2, 5, 7], 21, 21)).grid
h0 = half_average_diagonal(grid)
print(f"boot, h0 = {h0:.4f} from the 21x21 grid")

seeds = grid.interior().reshape(-1, 2)
seeds = seeds[signed_distance(poly, seeds) < 0]

for label, pts in (("a (lattice)", None), ("b (grid seeds)", seeds)):
    mesh = distmesh_generate(poly, DistMeshParams(h0), pts)
    q = triangle_quality(mesh)
    bad = delaunay_violations(mesh)
    print(f"\nvariant {label}")
    print(f"  {len(mesh.nodes)} nodes, {mesh.n_interior} interior, {len(mesh.triangles)} triangles")
    print(f"  quality 2 r_in / r_circ: min {q.min():.3f}, median {np.median(q):.3f}")
    print(f"  Delaunay violations: {len(bad)}")
    for w in mesh.warnings:
        print(f"  warning: {w}")
