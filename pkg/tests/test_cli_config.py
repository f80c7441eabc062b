import csv
import json

import pytest

from rdgrowth import ConfigError
from rdgrowth.cli import EXIT_CONFIG, main
from rdgrowth.config import ExperimentSpec, load_spec, spec_from_mapping


def read_csv(path):
    with open(path) as fh:
        first = fh.readline()
        rows = list(csv.DictReader(fh))
    return first, rows


def write_cfg(tmp_path, text):
    path = tmp_path / "cfg.yaml"
    path.write_text(text)
    return path


@pytest.mark.parametrize("text, key", [
    ("primitives:\n  thetab: 1.0\n", "thetab"),
    ("primitives:\n  alpha: 2.0\n", "alpha"),
    ("polcy: {}\n", "polcy"),
    ("policy:\n  budget: 0.01\n", "policy.budget"),
    ("policy:\n  targets: everything\n", "targets"),
    ("oracle:\n  n_lines: 1.5\n", "oracle.n_lines"),
    ("sweep:\n  budgets: [-0.01]\n", "sweep.budgets"),
    ("seed: -3\n", "seed"),
    ("tolerance: 0.5\n", "tolerance"),
])
def test_config_errors_name_the_key(tmp_path, text, key):
    with pytest.raises(ConfigError, match=key):
        load_spec(write_cfg(tmp_path, text))


def test_cli_config_error_exit(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "primitives:\n  thetab: 1.0\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "config" and "thetab" in err["message"]
    assert main(["solve", "--seed", "-1", "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["sweep", "--workers", "0", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_default_config_file_matches_defaults():
    from pathlib import Path

    path = Path(__file__).parents[1] / "configs" / "default.yaml"
    assert load_spec(path) == ExperimentSpec()


def test_config_hash_tracks_content():
    a = spec_from_mapping({"primitives": {"lambda": 0.132}})
    b = spec_from_mapping({})
    c = spec_from_mapping({"seed": 1})
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_solve_outputs_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--out", str(out1)]) == 0
    assert main(["solve", "--out", str(out2)]) == 0
    manifest = json.loads((out1 / "manifest.json").read_text())
    h = manifest["config_sha256"]
    for name in manifest["files"]:
        if name.endswith(".csv"):
            first = (out1 / name).read_text().splitlines()[0]
            assert first.startswith("# schema=") and h in first
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    assert (out1 / "manifest.json").read_bytes() == (out2 / "manifest.json").read_bytes()
    _, rows = read_csv(out1 / "equilibrium.csv")
    assert len(rows) == 1 and float(rows[0]["welfare"]) == 100.0
    assert float(rows[0]["phi_b"]) < 1.0


def test_oracle_command(tmp_path):
    cfg = write_cfg(tmp_path, "oracle:\n  n_lines: 20000\n  horizon: 60\n  dt: 0.02\n"
                              "  ks_tol: 0.05\n")
    assert main(["oracle", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    _, rows = read_csv(tmp_path / "o" / "oracle.csv")
    assert {r["statistic"] for r in rows} >= {"phi_al", "ks_b", "growth"}
    assert all(r["passed"] == "True" for r in rows)


def test_planner_command_with_small_budget(tmp_path):
    cfg = write_cfg(tmp_path, "planner:\n  n_starts: 1\n  max_evals: 15\n"
                              "  subsidy_targets: all\n  subsidy_budget: 0.0025\n")
    assert main(["planner", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    _, rows = read_csv(tmp_path / "o" / "planner.csv")
    assert [r["row"] for r in rows] == ["market", "planner", "market_subsidy_all",
                                        "planner_subsidy_all"]
    assert float(rows[1]["welfare"]) >= 100.0
    _, trace = read_csv(tmp_path / "o" / "planner_trace.csv")
    assert len(trace) >= 30


@pytest.mark.slow
def test_sweep(tmp_path):
    assert main(["sweep", "--out", str(tmp_path / "o")]) == 0
    _, rows = read_csv(tmp_path / "o" / "sweep.csv")
    assert len(rows) == 12
    basic = [float(r["welfare"]) for r in rows if r["row"].startswith("basic_")]
    assert basic[0] == 100.0
    assert all(b > a for a, b in zip(basic, basic[1:]))
