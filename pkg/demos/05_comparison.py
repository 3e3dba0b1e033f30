"""
A small comparison run
======================

The full benchmark crosses regions, grid sizes, problems and methods and
writes results.csv, one SVG bar chart per problem and plain-text tables.
This runs a reduced version: two regions, two sizes, one problem.
"""
from pathlib import Path

from meshbench import data_path, read_config, run_experiment

cfg = read_config(data_path("compare.cfg"))
cfg.regions = [r for r in cfg.regions if r.name in ("lake", "boot")]
cfg.sizes = [21, 41]
cfg.problems = [2]

out = Path("comparison_demo")
records, failures = run_experiment(cfg, out)
print((out / "tables.txt").read_text())
print(f"{len(records)} records, {len(failures)} failures")
print("files:", ", ".join(sorted(p.name for p in out.iterdir())))
