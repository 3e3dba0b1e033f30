import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshbench.geometry import (
    GeometryError,
    Polygon,
    point_in_polygon,
    polygon_signed_area,
    read_polygon,
    scale_to_unit,
    signed_distance,
    triangle_signed_area,
    write_polygon,
)

from conftest import UNIT_SQUARE, bundled_regions

coords = st.floats(-100, 100, allow_nan=False)
points = st.tuples(coords, coords)


@pytest.mark.parametrize(
    "a, b, c, expected",
    [((0, 0), (1, 0), (0, 1), 0.5), ((0, 0), (0, 1), (1, 0), -0.5), ((0, 0), (1, 1), (2, 2), 0.0)],
)
def test_triangle_signed_area(a, b, c, expected):
    assert triangle_signed_area(a, b, c) == expected


@given(points, points, points)
def test_triangle_area_antisymmetric(a, b, c):
    s = triangle_signed_area(a, b, c)
    tol = 1e-9 * (1 + abs(s))
    assert triangle_signed_area(b, a, c) == pytest.approx(-s, abs=tol)
    assert triangle_signed_area(a, c, b) == pytest.approx(-s, abs=tol)
    assert triangle_signed_area(c, b, a) == pytest.approx(-s, abs=tol)


def test_polygon_signed_area():
    assert polygon_signed_area(np.array(UNIT_SQUARE)) == 1.0
    assert polygon_signed_area(np.array(UNIT_SQUARE[::-1])) == -1.0
    assert polygon_signed_area(Polygon([(0, 0), (1, 0), (0, 1)])) == 0.5


def test_clockwise_input_is_reversed():
    p = Polygon(UNIT_SQUARE[::-1])
    assert p.reversed and p.area == 1.0
    assert not Polygon(UNIT_SQUARE).reversed


@given(st.integers(3, 12), st.floats(0.1, 10), st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 11))
def test_fan_area_matches_shoelace(k, r, cx, cy, start):
    th = np.linspace(0, 2 * np.pi, k, endpoint=False)
    v = np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])
    s = start % k
    fan = sum(triangle_signed_area(v[s], v[(s + i) % k], v[(s + i + 1) % k]) for i in range(1, k - 1))
    assert fan == pytest.approx(polygon_signed_area(Polygon(v)), rel=1e-12)


@pytest.mark.parametrize(
    "verts, msg",
    [
        ([(0, 0), (1, 0)], "at least 3"),
        ([(0, 0), (1, 0), (1, 0), (0, 1)], "repeated"),
        ([(0, 0), (1, 0), (2, 0)], "zero area"),
        ([(0, 0), (2, 1), (2, 0), (0, 2)], "intersect"),
        ([(0, 0), (np.nan, 0), (0, 1)], "finite"),
    ],
)
def test_invalid_polygons(verts, msg):
    with pytest.raises(GeometryError, match=msg):
        Polygon(verts)


@pytest.mark.parametrize("q, expected", [((0.5, 0.5), -0.5), ((2.0, 0.5), 1.0), ((1.0, 0.5), 0.0)])
def test_signed_distance_square(q, expected):
    assert signed_distance(Polygon(UNIT_SQUARE), q) == expected


def test_signed_distance_vectorized():
    d = signed_distance(Polygon(UNIT_SQUARE), np.array([[0.5, 0.5], [2.0, 0.5]]))
    np.testing.assert_array_equal(d, [-0.5, 1.0])


def test_points_near_edge_are_on_boundary():
    p = Polygon(UNIT_SQUARE)
    assert signed_distance(p, (0.5, 1e-13)) == 0.0
    assert signed_distance(p, (0.5, 1e-9)) == pytest.approx(-1e-9)


def _crossing_reference(v, q):
    # textbook ray casting, written independently of the module
    inside = False
    k = len(v)
    for i in range(k):
        (x1, y1), (x2, y2) = v[i], v[(i + 1) % k]
        if (y1 > q[1]) != (y2 > q[1]):
            x = x1 + (q[1] - y1) * (x2 - x1) / (y2 - y1)
            if q[0] < x:
                inside = not inside
    return inside


@pytest.mark.parametrize("region", bundled_regions(), ids=lambda r: r[0])
def test_sign_agrees_with_crossing_number(region):
    _, poly, _ = region
    rng = np.random.default_rng(7)
    q = rng.uniform(-0.1, 1.1, (2000, 2))
    d = signed_distance(poly, q)
    ref = np.array([_crossing_reference(poly.vertices, p) for p in q])
    off = d != 0
    np.testing.assert_array_equal((d < 0)[off], ref[off])
    np.testing.assert_array_equal(point_in_polygon(poly, q)[off], ref[off])


def test_scale_to_unit_examples():
    sq = scale_to_unit(Polygon([(2, 2), (4, 2), (4, 4), (2, 4)]))
    np.testing.assert_allclose(sq.vertices, UNIT_SQUARE)
    rect = scale_to_unit(Polygon([(0, 0), (2, 0), (2, 1), (0, 1)]))
    assert rect.bbox() == (0.0, 0.0, 1.0, 0.5)
    unit = Polygon(UNIT_SQUARE)
    np.testing.assert_array_equal(scale_to_unit(unit).vertices, unit.vertices)


def test_scale_to_unit_degenerate():
    p = Polygon(UNIT_SQUARE)
    # Polygon rejects zero-area input, so build the degenerate case directly
    p.vertices = np.zeros((4, 2))
    with pytest.raises(GeometryError):
        scale_to_unit(p)


@settings(max_examples=50)
@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(-50, 50), st.floats(-50, 50))
def test_scale_to_unit_idempotent_and_aspect(sx, sy, tx, ty):
    base = np.array([(0, 0), (1, 0), (1.3, 0.8), (0.4, 1.1), (-0.2, 0.5)])
    p = Polygon(base * [sx, sy] + [tx, ty])
    once = scale_to_unit(p)
    twice = scale_to_unit(once)
    np.testing.assert_allclose(twice.vertices, once.vertices, atol=1e-12)
    x0, y0, x1, y1 = once.bbox()
    assert (x0, y0) == (0.0, 0.0) and max(x1, y1) == pytest.approx(1.0, abs=1e-15)
    w, h = np.ptp(p.vertices, axis=0)
    assert (x1 / y1) == pytest.approx(w / h, rel=1e-12)


def test_polygon_file_round_trip(tmp_path):
    v = np.random.default_rng(3).uniform(size=(1, 2)) + np.array([(0, 0), (1, 0), (1, 1), (0, 1)])
    p = Polygon(v * np.pi)
    write_polygon(tmp_path / "p.poly", p)
    np.testing.assert_array_equal(read_polygon(tmp_path / "p.poly").vertices, p.vertices)


def test_read_polygon_reorients(tmp_path):
    (tmp_path / "cw.poly").write_text("4\n0 0\n0 1\n1 1\n1 0\n")
    p = read_polygon(tmp_path / "cw.poly")
    assert p.area == 1.0 and p.reversed


@pytest.mark.parametrize("text", ["", "3\n0 0\n1 0\n", "x\n", "3\n0 0\n1 zero\n0 1\n"])
def test_read_polygon_malformed(tmp_path, text):
    (tmp_path / "bad.poly").write_text(text)
    with pytest.raises(GeometryError):
        read_polygon(tmp_path / "bad.poly")
