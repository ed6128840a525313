"""Smoke test for the python bindings.

Invoked by ctest as `test_smoke.py <dir-with-_core> <python-package-dir>`;
with no arguments it expects an installed smallball_lab package.
"""
import json
import os
import sys
import tempfile

if len(sys.argv) >= 3:
    sys.path.insert(0, sys.argv[2])
    sys.path.insert(0, sys.argv[1])

import smallball_lab as sl

names = sl.experiment_names()
assert len(names) == 8, names
assert names[0] == "entropy" and "aperiodic" in names
assert sl.experiment_checks("smallball") == ["mc_sandwich", "geometric_ratio_band"]

cfg = json.loads(sl.default_config_json("aperiodic"))
assert cfg["experiment"] == "aperiodic"
assert cfg["seed"] == 20260823
cfg["m_max"] = 2
cfg["out"] = os.path.join(tempfile.mkdtemp(), "aperiodic_run")

rep = sl.run_experiment(json.dumps(cfg))
assert rep.experiment == "aperiodic"
assert rep.all_pass()
assert [c.name for c in rep.checks] == ["aperiodic_increment_witness"]
assert all(c.passed for c in rep.checks)
assert os.path.exists(os.path.join(cfg["out"], "summary.json"))
assert os.path.exists(os.path.join(cfg["out"], "manifest.json"))
assert os.path.exists(os.path.join(cfg["out"], "aperiodic.csv"))

summary = json.loads(rep.summary_json())
assert summary["pass"] is True
assert summary["tables"] == ["aperiodic"]

plot = rep.plot_csv()
assert plot.startswith("series,x,y\n")
assert "own_term" in plot

u = sl.sequence_log_neg_log(1.0, 0.5)
assert 0.0 < u < 5.0, u
lo, hi = sl.geometric_ball_bounds(0.5, 1e-4)
assert lo <= hi < 0.0, (lo, hi)
lo2, hi2 = sl.series_sandwich(2, 2, 0.5, 0.1)
assert lo2 <= hi2 < 0.0, (lo2, hi2)

try:
    sl.compute_report("{}")
    raise AssertionError("empty config must be rejected")
except ValueError as err:
    assert "experiment" in str(err)

print("python smoke ok")
