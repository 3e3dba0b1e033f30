import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from meshbench import data_path
from meshbench.report import (
    METHODS,
    ExperimentConfig,
    ExperimentRecord,
    RegionSpec,
    empirical_order,
    format_table,
    quadratic_error,
    read_config,
    run_experiment,
    write_csv,
)


def square_config(tmp_path, **extra):
    lines = [
        "regions = square",
        f"region.square.polygon = {data_path('square.poly')}",
        "region.square.corners = 0, 1, 2, 3",
    ] + [f"{k} = {v}" for k, v in extra.items()]
    path = tmp_path / "c.cfg"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_quadratic_error_examples():
    assert quadratic_error([1, 2, 3], [1, 2, 3], [1, 1, 1]) == 0.0
    assert quadratic_error([1, 1], [0, 2], [0.5, 0.5]) == 1.0
    assert quadratic_error([2], [0], [0.25]) == 1.0
    with pytest.raises(ValueError):
        quadratic_error([1, 2], [1], [1, 1])
    with pytest.raises(ValueError):
        quadratic_error([1], [1], [-1])


@given(st.floats(-1e3, 1e3))
def test_quadratic_error_homogeneous(c):
    rng = np.random.default_rng(0)
    u, U, a = rng.normal(size=(3, 20))
    a = np.abs(a)
    base = quadratic_error(u, U, a)
    assert quadratic_error(U + c * (u - U), U, a) == pytest.approx(abs(c) * base, rel=1e-9, abs=1e-12)


def test_empirical_order_examples():
    assert empirical_order(4.59e-3, 1.22e-3, 21, 41) == pytest.approx(1.98, abs=0.005)
    assert empirical_order(4.0, 1.0, 10, 20) == pytest.approx(2.0)
    assert empirical_order(1.0, 1.0, 21, 41) == 0.0
    for bad in [(0, 1, 21, 41), (1, 1, 41, 21), (1, -1, 21, 41)]:
        with pytest.raises(ValueError):
            empirical_order(*bad)


@given(st.floats(1e-12, 1e3), st.floats(0.1, 6), st.integers(2, 500))
def test_empirical_order_identity(E, p, n):
    assert empirical_order(E, E / 2**p, n, 2 * n) == pytest.approx(p, rel=1e-9)


def test_read_config_bundled():
    cfg = read_config(data_path("compare.cfg"))
    assert len(cfg.regions) >= 4
    assert cfg.sizes == [21, 41, 81] and cfg.problems == [1, 2, 3] and cfg.methods == list(METHODS)
    for r in cfg.regions:
        assert r.polygon.exists() and len(r.corners) == 4


@pytest.mark.parametrize(
    "body, msg",
    [
        ("regions = a\n", "needs"),
        ("regions = a\nregion.a.polygon = x.poly\nregion.a.corners = 0, 1, 2\n", "4 corners"),
        ("regions\n", "key = value"),
        ("regions = \n", "no regions"),
    ],
)
def test_read_config_errors(tmp_path, body, msg):
    (tmp_path / "c.cfg").write_text(body)
    with pytest.raises(ValueError, match=msg):
        read_config(tmp_path / "c.cfg")


@pytest.mark.parametrize("kw", [dict(sizes=[21, 21]), dict(sizes=[2, 5]), dict(methods=["fd"]), dict(problems=[4])])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ExperimentConfig(regions=[RegionSpec("x", data_path("square.poly"), (0, 1, 2, 3))], **kw)


def test_run_square_fd(tmp_path):
    cfg = read_config(square_config(tmp_path, sizes="21, 41", problems="1", methods="structured-fd"))
    records, failures = run_experiment(cfg, tmp_path / "out")
    assert not failures
    assert [(r.size, r.elements, r.unknowns) for r in records] == [(21, 800, 361), (41, 3200, 1521)]
    assert records[0].order is None and 1.7 <= records[1].order <= 2.5
    rows = list(csv.DictReader(open(tmp_path / "out" / "results.csv")))
    assert list(rows[0]) == ["region", "size", "method", "problem", "elements", "unknowns", "error", "order"]
    assert rows[0]["order"] == "" and rows[1]["order"] != ""
    for k in (1,):
        ET.parse(tmp_path / "out" / f"err_p{k}.svg")


def test_run_all_methods_cardinality(tmp_path):
    cfg = read_config(square_config(tmp_path, sizes="11, 21"))
    records, failures = run_experiment(cfg, tmp_path / "out")
    assert len(records) + len(failures) == 2 * 3 * 3
    rows = list(csv.reader(open(tmp_path / "out" / "results.csv")))
    assert len(rows) - 1 == len(records)
    for pid in (1, 2, 3):
        root = ET.parse(tmp_path / "out" / f"err_p{pid}.svg").getroot()
        assert root.tag.endswith("svg")
    table = (tmp_path / "out" / "tables.txt").read_text()
    assert "structured-fd" in table and "distmesh-b-fem" in table


def test_failures_are_recorded_not_raised(tmp_path):
    cfg = ExperimentConfig(
        regions=[
            RegionSpec("missing", tmp_path / "nope.poly", (0, 1, 2, 3)),
            RegionSpec("square", data_path("square.poly"), (0, 1, 2, 3)),
        ],
        sizes=[11],
        problems=[1],
        methods=["structured-fd"],
    )
    records, failures = run_experiment(cfg)
    assert len(records) == 1 and records[0].region == "square"
    assert len(failures) == 1 and "missing" in failures[0]


def test_csv_format(tmp_path):
    recs = [
        ExperimentRecord("r", 21, "structured-fd", 1, 800, 361, 1.23456789e-3),
        ExperimentRecord("r", 41, "structured-fd", 1, 3200, 1521, 3.0e-4, order=2.0412345),
    ]
    write_csv(tmp_path / "r.csv", recs)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[1] == "r,21,structured-fd,1,800,361,1.234568e-03,"
    assert lines[2] == "r,41,structured-fd,1,3200,1521,3.000000e-04,2.0412"
    assert "2.04" in format_table(recs, 1)
