import json
import subprocess
import sys

import pytest

from roughflow import config as cfg
from roughflow.cli import example_names, main, resolve_config_path

FAST_FLOW = {
    "kind": "flow",
    "seed": 1,
    "grid": {"n_points": 33},
    "driver": {"type": "fbm", "hurst": 0.5, "dim": 1},
    "field": {"type": "sincos", "dim": 1, "terms": [{"k": [1], "sin": [-1.0]}]},
    "points": [[0.0], [1.0]],
}


def write(tmp_path, config, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(config))
    return p


def test_schema_rejects_unknown_keys():
    with pytest.raises(cfg.ConfigError, match="Additional properties"):
        cfg.validate(dict(FAST_FLOW, colour="red"))
    with pytest.raises(cfg.ConfigError, match="driver"):
        cfg.validate(dict(FAST_FLOW, driver={"type": "fbm", "hurst": 0.5, "speed": 2}))


def test_kind_specific_requirements():
    bad = dict(FAST_FLOW)
    del bad["points"]
    with pytest.raises(cfg.ConfigError, match="requires: points"):
        cfg.validate(bad)


@pytest.mark.parametrize("change,message", [
    ({"driver": {"type": "fbm", "hurst": 1.5}}, r"hurst must lie in \(0,1\)"),
    ({"gamma": 0.7}, "gamma must lie"),
    ({"grid": {"n_points": 5000}}, "at most 4097"),
    ({"points": [[0.0, 1.0]]}, "coordinates"),
    ({"field": {"type": "constant", "vector": [1.0, 2.0]}}, "dimension"),
])
def test_semantic_errors(change, message):
    with pytest.raises(cfg.ConfigError, match=message):
        cfg.validate(dict(FAST_FLOW, **change))


def test_config_hash_is_canonical():
    reordered = json.loads(json.dumps(FAST_FLOW, sort_keys=True))
    assert cfg.config_hash(reordered) == cfg.config_hash(FAST_FLOW)
    assert cfg.config_hash(dict(FAST_FLOW, seed=2)) != cfg.config_hash(FAST_FLOW)


def test_run_writes_report_and_csv(tmp_path, capsys):
    p = write(tmp_path, FAST_FLOW)
    out = tmp_path / "out"
    assert main(["run", str(p), "--output", str(out), "--threads", "2"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config_hash"] == cfg.config_hash(FAST_FLOW)
    assert report["kind"] == "flow" and report["wall_time"] >= 0
    assert report["results"]["apriori_pass"] is True
    assert (out / "flow.csv").exists() and (out / "path.csv").exists()


def test_hurst_out_of_range_exits_2(tmp_path, capsys):
    p = write(tmp_path, dict(FAST_FLOW, driver={"type": "fbm", "hurst": 1.5}))
    assert main(["run", str(p), "-o", str(tmp_path / "o")]) == 2
    assert "hurst must lie in (0,1)" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_blow_up_exits_3(tmp_path, capsys):
    config = dict(FAST_FLOW, field={"type": "linear", "matrix": [[40.0]]})
    assert main(["run", str(write(tmp_path, config)), "-o", str(tmp_path / "o")]) == 3
    assert "blow-up" in capsys.readouterr().err


def test_missing_and_malformed_configs(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate", str(bad)]) == 2
    assert main(["run", str(write(tmp_path, FAST_FLOW)), "--threads", "0", "-o", str(tmp_path / "o")]) == 2


def test_validate_and_list_examples(capsys):
    assert main(["list-examples"]) == 0
    listing = capsys.readouterr().out
    for name in example_names():
        assert name in listing
        assert main(["validate", name]) == 0
    assert "translation.json" in example_names()


def test_packaged_fallback(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert resolve_config_path("examples/translation.json").name == "translation.json"
    assert resolve_config_path("examples/translation.json").exists()
    assert resolve_config_path("translation").exists()


def test_console_script_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "roughflow.cli", "validate", str(write(tmp_path, FAST_FLOW))],
        capture_output=True, text=True,
    )
    assert out.returncode == 0 and out.stdout.startswith("ok: flow")


def test_env_threads(tmp_path, monkeypatch):
    monkeypatch.setenv("ROUGHFLOW_THREADS", "3")
    from roughflow.parallel import resolve_threads

    assert resolve_threads() == 3
    assert resolve_threads(1) == 1
    monkeypatch.setenv("ROUGHFLOW_THREADS", "")
    assert resolve_threads() >= 1


@pytest.mark.parametrize("config", [
    {"kind": "fbm", "seed": 3, "grid": {"n_points": 33}, "driver": {"type": "fbm", "hurst": 0.5}, "samples": 500},
    {"kind": "irregularity", "grid": {"n_points": 65}, "driver": {"type": "linear", "velocity": [1.0]},
     "rho": 2.0, "magnitudes": [1, 2, 4]},
    {"kind": "convergence", "grid": {"n_points": 3}, "driver": {"type": "sine", "amplitude": [0.3]},
     "field": {"type": "sincos", "dim": 1, "terms": [{"k": [1], "sin": [-1.0]}]},
     "quantity": "flow-endpoint", "levels": [3, 4, 5]},
])
def test_small_runs_of_each_kind(tmp_path, config):
    out = tmp_path / "o"
    assert main(["run", str(write(tmp_path, config)), "-o", str(out)]) == 0
    results = json.loads((out / "report.json").read_text())["results"]
    assert results
    if config["kind"] == "convergence":
        # driver interpolation between coarse nodes limits the rate to 2
        assert results["fitted_slope"] > 1.8
