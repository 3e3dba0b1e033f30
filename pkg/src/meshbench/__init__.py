"""Convex structured grids on irregular polygons, generalized finite
differences and linear finite elements for anisotropic diffusion, and a
harness comparing the two.
"""
from importlib import resources

from .geometry import GeometryError, Polygon, read_polygon, scale_to_unit, signed_distance
from .grid import (
    BoundarySpec,
    StructuredGrid,
    distribute_boundary,
    is_convex,
    read_grid,
    transfinite_init,
    write_grid,
)
from .functionals import FunctionalConfig, OptimizeResult, optimize_grid
from .gfd import SolverError, StencilError, solve_fd
from .fem import solve_fem
from .problems import Problem, builtin_problem
from .triangulation import DistMeshParams, TriMesh, delaunay, distmesh_generate, read_mesh, write_mesh
from .report import empirical_order, quadratic_error, read_config, run_experiment

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a bundled data file (polygons and the comparison config)."""
    return resources.files(__name__).joinpath("data", name)


__all__ = [
    "GeometryError", "Polygon", "read_polygon", "scale_to_unit", "signed_distance",
    "BoundarySpec", "StructuredGrid", "distribute_boundary", "is_convex", "read_grid",
    "transfinite_init", "write_grid", "FunctionalConfig", "OptimizeResult", "optimize_grid",
    "SolverError", "StencilError", "solve_fd", "solve_fem", "Problem", "builtin_problem",
    "DistMeshParams", "TriMesh", "delaunay", "distmesh_generate", "read_mesh", "write_mesh",
    "empirical_order", "quadratic_error", "read_config", "run_experiment", "data_path",
]
