import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from windpm import config as cfgmod
from windpm.cli import main
from windpm.revenue import ConfigurationError
from windpm.solver import read_mps

TINY = {
    "life": 36,
    "seed": 5,
    "farm": {
        "turbines": 2,
        "farm_cost": 40.0,
        "components": [
            {"name": "rotor", "cm_cost": 162, "pm_cost": 28, "component_cost": 112,
             "shape": 3, "scale": 20},
            {"name": "gearbox", "cm_cost": 202, "pm_cost": 38, "component_cost": 152,
             "shape": 3, "scale": 16},
        ],
    },
    "variant": {"kind": "full-contract", "start": 0, "end": 18},
    "monte_carlo": {"samples": 300},
    "simulation": {"horizon": 24, "window": 12, "planner_samples": 300, "interval_grid": [6, 9, 12]},
}


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY))
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def assert_valid_schedule(path, start, end):
    """Months strictly increasing inside (start, end] for every turbine and component."""
    seen = {}
    for turbine, comp, month in rows(path)[1:]:
        seen.setdefault((turbine, comp), []).append(int(month))
    for months in seen.values():
        assert all(start < t <= end for t in months)
        assert months == sorted(set(months))


def test_estimate_writes_tensor(tiny, tmp_path, capsys):
    out = tmp_path / "o"
    assert run("estimate", "--config", tiny, "--out", out) == 0
    table = rows(out / "tensor.csv")
    assert table[0] == ["variant", "i", "j", "u", "t", "value_k"]
    # one representative turbine, two components, pairs u < t <= 19
    assert len(table) - 1 == 2 * 19 * 20 // 2
    assert "M=300" in capsys.readouterr().out


def test_samples_flag_overrides(tiny, tmp_path, capsys):
    assert run("estimate", "--config", tiny, "--out", tmp_path, "--samples", 123) == 0
    assert "M=123" in capsys.readouterr().out


def test_estimate_cache_is_reused(tiny, tmp_path):
    out = tmp_path / "o"
    assert run("estimate", "--config", tiny, "--out", out) == 0
    cached = sorted((out / "cache").rglob("*.npz"))
    assert len(cached) == 1
    first = (out / "tensor.csv").read_bytes()
    stamp = cached[0].stat().st_mtime_ns
    assert run("estimate", "--config", tiny, "--out", out) == 0
    assert (out / "tensor.csv").read_bytes() == first
    assert cached[0].stat().st_mtime_ns == stamp
    assert run("estimate", "--config", tiny, "--out", out, "--seed", 6) == 0
    assert len(list((out / "cache").rglob("*.npz"))) == 2


def test_plan_outputs(tiny, tmp_path):
    out = tmp_path / "p"
    mps = tmp_path / "plan.mps"
    assert run("plan", "--config", tiny, "--out", out, "--export-mps", mps) == 0
    assert_valid_schedule(out / "schedule.csv", 0, 18)
    summary = rows(out / "plan_summary.csv")
    assert summary[0][:4] == ["variant", "start", "end", "objective_k"]
    assert summary[1][5] == "optimal"
    assert read_mps(mps).c.size > 0


def test_plan_end_of_life_window_defaults_to_life(tiny, tmp_path):
    out = tmp_path / "e"
    assert run("plan", "--config", tiny, "--variant", "end-of-life", "--out", out) == 0
    assert rows(out / "plan_summary.csv")[1][1:3] == ["0", "36"]
    assert_valid_schedule(out / "schedule.csv", 0, 36)


def test_availability_variants_feasible_and_infeasible(tiny, tmp_path):
    out = tmp_path / "a"
    assert run("plan", "--config", tiny, "--variant", "full-contract-time-avail",
               "--epsilon", "1", "--out", out) == 0
    assert_valid_schedule(out / "schedule.csv", 0, 18)
    assert run("plan", "--config", tiny, "--variant", "full-contract-prod-avail",
               "--epsilon", "1e-6", "--out", out) == 1


def test_simulate_single_history(tiny, tmp_path):
    out = tmp_path / "s"
    assert run("simulate", "--config", tiny, "--out", out) == 0
    trace = rows(out / "trace.csv")
    assert trace[0] == ["time", "turbine", "component", "event", "cost_k", "downtime_months"]
    metrics = rows(out / "metrics.csv")
    assert metrics[0][:4] == ["policy", "total_cost_k", "downtime_months", "availability_pct"]
    assert (out / "plans.csv").exists()


def test_simulate_script(tiny, tmp_path):
    script = tmp_path / "f.json"
    script.write_text(json.dumps([{"month": 7.5, "turbine": 2, "component": "gearbox"}]))
    out = tmp_path / "s"
    assert run("simulate", "--config", tiny, "--policy", "pure-cm", "--script", script,
               "--out", out) == 0
    assert rows(out / "trace.csv")[1][:4] == ["7.5", "2", "gearbox", "CM"]


def test_simulate_constant_interval_tunes(tiny, tmp_path):
    out = tmp_path / "ci"
    assert run("simulate", "--config", tiny, "--policy", "constant-interval", "--out", out) == 0
    intervals = rows(out / "metrics.csv")[1][6].split()
    assert len(intervals) == 2 and set(intervals) <= {"6", "9", "12"}


def test_simulate_bad_script(tiny, tmp_path):
    script = tmp_path / "f.json"
    script.write_text("not json")
    assert run("simulate", "--config", tiny, "--script", script, "--out", tmp_path) == 2


def test_price_insurance(tiny, tmp_path):
    out = tmp_path / "ins"
    assert run("price-insurance", "--config", tiny, "--delta", "0.5,1", "--out", out) == 0
    table = rows(out / "pricing.csv")
    assert table[0] == ["delta", "F_star_k", "price_k", "n_stops", "farm_stops"]
    assert [r[0] for r in table[1:]] == ["0.0", "0.5", "1.0"]
    assert float(table[1][2]) == 0.0
    f = [float(r[1]) for r in table[1:]]
    assert f[0] > f[1] > f[2]


def test_export(tiny, tmp_path):
    out = tmp_path / "x"
    assert run("export", "--config", tiny, "--out", out) == 0
    prob = read_mps(out / "model.mps")
    assert prob.columns[0] == "x_0_0_0_1"


def test_invalid_config_reports_schema_errors(tmp_path, capsys):
    bad = dict(TINY, farm={"turbines": 0, "components": []})
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert run("plan", "--config", path, "--out", tmp_path) == 2
    err = capsys.readouterr().err
    assert "farm/turbines" in err and "farm/components" in err


@pytest.mark.parametrize("content", ["{", "[1, 2]"])
def test_unreadable_config(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    assert run("estimate", "--config", path, "--out", tmp_path) == 2


def test_missing_config(tmp_path):
    assert run("estimate", "--config", tmp_path / "nope.json", "--out", tmp_path) == 2


def test_window_outside_life(tiny, tmp_path):
    assert run("plan", "--config", tiny, "--horizon", 99, "--out", tmp_path) == 2


def test_bad_threads(tiny, tmp_path):
    assert run("estimate", "--config", tiny, "--threads", 0, "--out", tmp_path) == 2


def test_module_entry_point(tiny, tmp_path):
    res = subprocess.run([sys.executable, "-m", "windpm", "export", "--config", tiny,
                          "--out", str(tmp_path), "--no-cache"], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "model.mps").exists()
    assert not (tmp_path / "cache").exists()


def test_config_defaults_and_digest():
    cfg = cfgmod.resolve({})
    assert cfg["farm"]["turbines"] == 10 and len(cfg["farm"]["components"]) == 4
    assert cfgmod.digest(cfg) == cfgmod.digest(cfgmod.resolve({}))
    other = cfgmod.resolve({"seed": 1})
    assert cfgmod.digest(other) != cfgmod.digest(cfg)


@pytest.mark.parametrize("raw", [
    {"life": 24, "variant": {"end": 30}},
    {"simulation": {"horizon": 500}},
    {"revenue": {"monthly": [1.0] * 13}},
    {"farm": {"turbines": 2, "components": [{"name": "a", "cm_cost": 1, "pm_cost": 1,
                                             "shape": 1, "scale": 1}], "farm_cost": [1, 2]}},
    {"unknown": 1},
])
def test_config_rejections(raw):
    with pytest.raises(ConfigurationError):
        cfgmod.resolve(raw)


def test_shipped_configs_are_valid():
    root = Path(__file__).parent.parent / "configs"
    for path in sorted(root.glob("*.json")):
        if path.name.endswith("_failures.json"):
            continue
        cfgmod.build(cfgmod.load(path))
