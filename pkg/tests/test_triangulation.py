import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshbench.geometry import GeometryError, Polygon, scale_to_unit, signed_distance
from meshbench.grid import StructuredGrid
from meshbench.triangulation import (
    DistMeshParams,
    TriMesh,
    bowyer_watson,
    boundary_nodes,
    delaunay,
    delaunay_violations,
    distmesh_generate,
    half_average_diagonal,
    in_circle,
    read_mesh,
    triangle_quality,
    write_mesh,
)

from conftest import UNIT_SQUARE, bundled_regions, cshape, uniform_grid


def brute_force_empty_circles(pts, tris, rtol=1e-10):
    """O(n t) check with circumcircles computed from scratch."""
    for t in tris:
        a, b, c = pts[t]
        A = np.array([b - a, c - a])
        rhs = 0.5 * np.array([b @ b - a @ a, c @ c - a @ a])
        center = np.linalg.solve(A, rhs)
        r = np.linalg.norm(a - center)
        d = np.linalg.norm(pts - center, axis=1)
        others = np.setdiff1d(np.arange(len(pts)), t)
        if np.any(d[others] < r * (1 - rtol)):
            return False
    return True


def as_set(tris):
    return {frozenset(map(int, t)) for t in tris}


def signed_areas(pts, tris):
    t = pts[tris]
    return 0.5 * ((t[:, 1, 0] - t[:, 0, 0]) * (t[:, 2, 1] - t[:, 0, 1]) - (t[:, 1, 1] - t[:, 0, 1]) * (t[:, 2, 0] - t[:, 0, 0]))


@pytest.mark.parametrize("method", ["bowyer-watson", "qhull"])
def test_small_cases(method):
    sq = delaunay(np.array(UNIT_SQUARE), method)
    assert sq.n_triangles == 2 and brute_force_empty_circles(sq.nodes, sq.triangles)
    tri = delaunay(np.array([(0, 0), (1, 0), (0, 1)], dtype=float), method)
    assert tri.n_triangles == 1


@pytest.mark.parametrize("method", ["bowyer-watson", "qhull"])
def test_random_points(method):
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(50, 2))
    m = delaunay(pts, method)
    assert brute_force_empty_circles(m.nodes, m.triangles)
    assert np.all(signed_areas(m.nodes, m.triangles) > 0)
    assert len(delaunay_violations(m)) == 0


def test_backends_agree():
    pts = np.random.default_rng(1).uniform(size=(80, 2))
    assert as_set(delaunay(pts, "bowyer-watson").triangles) == as_set(delaunay(pts, "qhull").triangles)


def test_cocircular_grid_is_deterministic():
    # every cell of a lattice is cocircular; both back ends must still be valid
    pts = np.array(list(itertools.product(range(5), range(4))), dtype=float)
    for method in ("bowyer-watson", "qhull"):
        m = delaunay(pts, method)
        assert m.n_triangles == 2 * 4 * 3
        assert brute_force_empty_circles(m.nodes, m.triangles)
        assert np.all(signed_areas(m.nodes, m.triangles) > 0)


@pytest.mark.parametrize(
    "pts", [[(0, 0), (1, 1)], [(0, 0), (1, 1), (2, 2), (3, 3)], [(0, 0), (1, 0), (0, 1), (1e-13, 0)]]
)
def test_delaunay_errors(pts):
    with pytest.raises(GeometryError):
        delaunay(np.array(pts, dtype=float))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(40, 2))
    perm = rng.permutation(40)
    base = bowyer_watson(pts)
    shuffled = bowyer_watson(pts[perm])
    assert as_set(perm[shuffled]) == as_set(base)


def test_in_circle_exact_fallback():
    a, b, c = (0.0, 0.0), (1.0, 0.0), (0.0, 1.0)
    assert in_circle(a, b, c, (1.0, 1.0)) == 0
    assert in_circle(a, b, c, (0.5, 0.5)) == 1
    assert in_circle(a, b, c, (2.0, 2.0)) == -1
    assert in_circle(a, b, c, (1.0, 1.0 + 1e-15)) == -1


def test_half_average_diagonal():
    assert half_average_diagonal(uniform_grid(3, 3)) == pytest.approx(np.sqrt(0.5) / 2)
    single = StructuredGrid(np.array([[(0, 0), (0, 1)], [(1, 0), (1, 1)]], dtype=float))
    assert half_average_diagonal(single) == pytest.approx(np.sqrt(2) / 2)
    g = uniform_grid(5, 4)
    assert half_average_diagonal(StructuredGrid(2 * g.points)) == pytest.approx(2 * half_average_diagonal(g))


def test_boundary_nodes_keep_corners():
    p = Polygon([(0, 0), (1, 0), (1, 0.3), (0, 0.3)])
    b = boundary_nodes(p, 0.25)
    assert len(b) == 4 + 2 * 1 + 2 * 3
    for v in p.vertices:
        assert np.any(np.all(b == v, axis=1))


def check_mesh(mesh, poly):
    pts, tris = mesh.nodes, mesh.triangles
    assert np.all(signed_areas(pts, tris) > 0)
    assert np.all(signed_distance(poly, mesh.centroids()) < 0)
    assert np.all(np.abs(signed_distance(poly, pts[mesh.boundary_flags])) < 1e-9)
    # conformity: each directed edge at most once; interior edges appear in both directions
    directed = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    keys = {tuple(e) for e in directed}
    assert len(keys) == len(directed)
    single = [e for e in keys if (e[1], e[0]) not in keys]
    assert all(mesh.boundary_flags[a] and mesh.boundary_flags[b] for a, b in single)
    # every node is used
    assert np.array_equal(np.unique(tris), np.arange(len(pts)))
    assert mesh.n_interior == len(pts) - mesh.boundary_flags.sum()


def test_distmesh_square_variant_a():
    poly = Polygon(UNIT_SQUARE)
    h0 = 0.25
    mesh = distmesh_generate(poly, DistMeshParams(h0))
    check_mesh(mesh, poly)
    e = mesh.edges()
    length = np.linalg.norm(mesh.nodes[e[:, 0]] - mesh.nodes[e[:, 1]], axis=1)
    assert length.min() >= 0.6 * h0 and length.max() <= 1.6 * h0
    np.testing.assert_array_equal(mesh.nodes[mesh.boundary_flags], boundary_nodes(poly, h0))


@pytest.mark.parametrize("region", bundled_regions(), ids=lambda r: r[0])
def test_distmesh_regions(region):
    _, poly, _ = region
    mesh = distmesh_generate(poly, DistMeshParams(0.06))
    check_mesh(mesh, poly)
    assert np.median(triangle_quality(mesh)) > 0.9


def test_distmesh_variant_b_uses_seeds():
    poly = Polygon(UNIT_SQUARE)
    g = uniform_grid(9, 9)
    h0 = half_average_diagonal(g)
    seeds = g.interior().reshape(-1, 2)
    mesh = distmesh_generate(poly, DistMeshParams(h0, max_iters=1), seeds)
    # after a single small step the interior nodes are still near their seeds
    inner = mesh.nodes[~mesh.boundary_flags]
    assert len(inner) > 0
    d = np.min(np.linalg.norm(inner[:, None] - seeds[None], axis=2), axis=1)
    assert d.max() < 0.5 * h0
    full = distmesh_generate(poly, DistMeshParams(h0), seeds)
    check_mesh(full, poly)


def test_distmesh_nonconvex_reports_violations():
    poly = cshape()
    mesh = distmesh_generate(poly, DistMeshParams(0.08))
    check_mesh(mesh, poly)
    bad = delaunay_violations(mesh)
    # any violating triangle touches the boundary
    for t in bad:
        assert mesh.boundary_flags[mesh.triangles[t]].any()


def test_distmesh_errors():
    poly = Polygon(UNIT_SQUARE)
    with pytest.raises(GeometryError, match="too large"):
        distmesh_generate(poly, DistMeshParams(2.0))
    with pytest.raises(GeometryError, match="strictly inside"):
        distmesh_generate(poly, DistMeshParams(0.2), np.array([[0.5, 0.5], [1.5, 0.5]]))
    with pytest.raises(ValueError):
        DistMeshParams(-1.0)


def test_distmesh_deterministic():
    poly = scale_to_unit(Polygon([(0, 0), (3, 0), (3.5, 2), (1, 2.5), (-0.5, 1)]))
    a = distmesh_generate(poly, DistMeshParams(0.1))
    b = distmesh_generate(poly, DistMeshParams(0.1))
    np.testing.assert_array_equal(a.nodes, b.nodes)
    np.testing.assert_array_equal(a.triangles, b.triangles)


def test_non_termination_warning():
    mesh = distmesh_generate(Polygon(UNIT_SQUARE), DistMeshParams(0.1, max_iters=2))
    assert any("no equilibrium" in w for w in mesh.warnings)


def test_mesh_file_round_trip(tmp_path):
    poly = cshape()
    mesh = distmesh_generate(poly, DistMeshParams(0.15))
    write_mesh(tmp_path / "m.mesh", mesh)
    back = read_mesh(tmp_path / "m.mesh")
    np.testing.assert_array_equal(back.nodes, mesh.nodes)
    np.testing.assert_array_equal(back.triangles, mesh.triangles)
    np.testing.assert_array_equal(back.boundary_flags, mesh.boundary_flags)
    first_tri = (tmp_path / "m.mesh").read_text().splitlines()[1 + len(mesh.nodes)]
    assert list(map(int, first_tri.split())) == list(mesh.triangles[0] + 1)


def test_trimesh_index_check():
    with pytest.raises(ValueError):
        TriMesh(np.zeros((3, 2)), np.array([[0, 1, 3]]), None)


@pytest.mark.parametrize("region", bundled_regions(), ids=lambda r: r[0])
def test_every_interior_node_has_closed_star(region):
    # seeded from a coarse grid, nodes get pressed against the slot walls of the c-shape
    _, poly, corners = region
    from meshbench.functionals import optimize_grid
    from meshbench.grid import distribute_boundary

    grid = optimize_grid(distribute_boundary(poly, corners, 11, 11)).grid
    seeds = grid.interior().reshape(-1, 2)
    seeds = seeds[signed_distance(poly, seeds) < 0]
    mesh = distmesh_generate(poly, DistMeshParams(half_average_diagonal(grid)), seeds)
    t = mesh.triangles
    e = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    edges, count = np.unique(e, axis=0, return_counts=True)
    assert mesh.boundary_flags[edges[count == 1]].all()
