import json
import subprocess
import sys
from pathlib import Path

import pytest

from gtslln.cli import EXIT_CHECK, EXIT_COLLATERAL, EXIT_CONFIG, EXIT_OK, main, run_suite

SUITES = Path(__file__).resolve().parent.parent / "suites"

BASE = {
    "schema_version": 1,
    "name": "t2",
    "game": "hedge_set",
    "measure": {"kind": "laplace", "rate": 1.0},
    "strategy": {"id": "theorem2"},
    "reality": {"id": "iid"},
    "horizon": 500,
    "seed": 3,
    "runs": 2,
}


def write(tmp_path, cfg, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, BASE), "--out", str(out)]) == EXIT_OK
    d = out / "t2"
    for f in ("summary.txt", "trajectory.csv", "detectors.csv", "ladder.csv"):
        assert (d / f).exists(), f
    traj = (d / "trajectory.csv").read_text().splitlines()
    assert traj[0] == "n,x_n,M_n,portfolio_cost_n,K_n"
    assert traj[1] == "0,,,,1" and len(traj) == 502
    summary = (d / "summary.txt").read_text()
    assert "rng: philox4x64-v1" in summary and "status: ok" in summary


def test_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = write(tmp_path, BASE)
    main(["run", cfg, "--out", str(a)])
    main(["run", cfg, "--out", str(b)])
    for f in ("trajectory.csv", "detectors.csv", "summary.txt"):
        assert (a / "t2" / f).read_bytes() == (b / "t2" / f).read_bytes()


def test_seed_and_horizon_overrides(tmp_path):
    cfg = write(tmp_path, BASE)
    main(["run", cfg, "--out", str(tmp_path / "a")])
    main(["run", cfg, "--out", str(tmp_path / "b"), "--seed", "4", "--horizon", "100"])
    tb = (tmp_path / "b" / "t2" / "trajectory.csv").read_text().splitlines()
    assert len(tb) == 102
    ta = (tmp_path / "a" / "t2" / "trajectory.csv").read_text().splitlines()
    assert ta[2] != tb[2]


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("GTSLLN_OUTPUT_ROOT", str(tmp_path / "env"))
    assert main(["run", write(tmp_path, BASE)]) == EXIT_OK
    assert (tmp_path / "env" / "t2" / "summary.txt").exists()


@pytest.mark.parametrize(
    "patch",
    [
        {"schema_version": 2},
        {"game": "chess"},
        {"strategy": {"id": "bc_single"}},
        {"strategy": {"id": "nope"}},
        {"reality": {"id": "nope"}},
        {"epsilon": 0.5},
        {"rng": "mt19937"},
        {"horizon": 0},
        {"mode": "doob"},
    ],
)
def test_configuration_errors_exit_2(tmp_path, patch):
    cfg = dict(BASE, **patch)
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_missing_and_malformed_files_exit_2(tmp_path):
    assert main(["run", str(tmp_path / "none.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["run", str(bad)]) == EXIT_CONFIG


def test_collateral_violation_exits_3(tmp_path, capsys):
    cfg = {
        "schema_version": 1, "name": "broken", "game": "single",
        "hedge": {"kind": "power", "exponent": 2.0}, "nu": 1.0,
        "epsilon": 1.0, "enforce_ceiling": False,
        "strategy": {"id": "epsilon_single_plus"},
        "reality": {"id": "linear", "c": -0.5}, "horizon": 100,
    }
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path)]) == EXIT_COLLATERAL
    assert "collateral violation: round 1" in capsys.readouterr().out


def test_failed_check_exits_1(tmp_path):
    cfg = dict(BASE, reality={"id": "zeros"}, checks={"min_decade_slope": 0.1})
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path)]) == EXIT_CHECK


def test_validate(tmp_path, capsys):
    assert main(["validate", write(tmp_path, BASE)]) == EXIT_OK
    assert "coherence pass" in capsys.readouterr().out
    single = {
        "schema_version": 1, "name": "s", "game": "single",
        "hedge": {"kind": "power", "exponent": 2.0}, "measure": {"kind": "laplace", "rate": 1.0},
        "strategy": {"id": "theorem1"}, "reality": {"id": "zeros"}, "horizon": 10,
    }
    assert main(["validate", write(tmp_path, single)]) == EXIT_OK
    assert "A1 pass" in capsys.readouterr().out


def test_empty_suite_warns(tmp_path):
    with pytest.warns(UserWarning, match="empty suite"):
        ok, rows = run_suite({"schema_version": 1, "experiments": []}, tmp_path, tmp_path)
    assert ok and rows == []


def test_suite_expectations(tmp_path):
    suite = {
        "schema_version": 1,
        "experiments": [
            {"expect": "pass", "config": dict(BASE, name="ok")},
            {"expect": "config_error", "config": dict(BASE, name="bad", game="chess")},
            {"expect": "pass", "config": dict(BASE, name="wrong", game="chess")},
        ],
    }
    ok, rows = run_suite(suite, tmp_path, tmp_path / "o")
    assert not ok
    assert [r[3] for r in rows] == [True, True, False]
    report = (tmp_path / "o" / "suite_report.txt").read_text()
    assert report.splitlines()[-1] == "suite: FAIL"


def test_suite_with_path_entries_and_workers(tmp_path):
    suite = {"schema_version": 1, "experiments": [{"expect": "pass", "path": "theorem2_zeros.json"}]}
    ok, _ = run_suite(suite, SUITES, tmp_path, workers=2)
    assert ok


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "gtslln.cli", "validate", write(tmp_path, BASE)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
