import numpy as np
import pytest

from meshbench import data_path
from meshbench.geometry import Polygon, read_polygon, scale_to_unit
from meshbench.grid import distribute_boundary, transfinite_init
from meshbench.report import read_config

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


@pytest.fixture
def square():
    return Polygon(UNIT_SQUARE)


def uniform_grid(m, n, x0=0.0, x1=1.0, y0=0.0, y1=1.0):
    b = distribute_boundary(Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)]), [0, 1, 2, 3], m, n)
    return transfinite_init(b)


def bundled_regions():
    """``(name, unit-scaled polygon, corners)`` for every region of the bundled config."""
    cfg = read_config(data_path("compare.cfg"))
    return [(r.name, scale_to_unit(read_polygon(r.polygon)), r.corners) for r in cfg.regions]


def cshape():
    return scale_to_unit(read_polygon(data_path("cshape.poly")))


def random_grid(rng, m, n, jitter=0.15):
    """Uniform unit-square grid with interior nodes shaken by ``jitter`` cell widths."""
    g = uniform_grid(m, n)
    h = 1.0 / max(m, n)
    return g.with_interior(g.interior() + jitter * h * rng.uniform(-1, 1, g.interior().shape))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance")
        for line in RESULTS:
            terminalreporter.write_line(line)
