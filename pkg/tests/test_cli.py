import csv
import json

import numpy as np
import pytest

from lockrace.cli import EXIT_INPUT, EXIT_NO_CONVERGENCE, EXIT_OK, EXIT_VERIFY, main


@pytest.fixture
def flat_path(tmp_path, flat):
    path = tmp_path / "flat.json"
    path.write_text(flat.to_json(indent=2))
    return path


@pytest.fixture
def steep_path(tmp_path, steep):
    path = tmp_path / "steep.json"
    path.write_text(steep.to_json(indent=2))
    return path


def test_solve_stdout(flat_path, capsys):
    assert main(["solve", str(flat_path)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["converged"]
    assert doc["players"][0]["theta"][0] == pytest.approx(0.7324, abs=0.05)
    assert doc["players"][0]["theta"][1:] == [8.0] * 4


def test_solve_out_writes_manifest(steep_path, tmp_path):
    out = tmp_path / "sol.json"
    curves = tmp_path / "curves.csv"
    assert main(["solve", str(steep_path), "--out", str(out), "--grid", "101",
                 "--dump-curves", str(curves)]) == EXIT_OK
    manifest = json.loads((tmp_path / "sol.json.manifest.json").read_text())
    assert manifest["grid_size"] == 101
    assert manifest["outputs"] == [str(curves), str(out)]
    assert curves.read_text().startswith("player,k,t,upsilon")


def test_solve_non_convergence(flat_path, capsys):
    assert main(["solve", str(flat_path), "--max-iter", "1"]) == EXIT_NO_CONVERGENCE
    assert json.loads(capsys.readouterr().out)["converged"] is False


def test_malformed_json_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"horizon": 8,\n "cost_factor": 1\n "players": []}')
    assert main(["solve", str(bad)]) == EXIT_INPUT
    assert "bad.json:3:2" in capsys.readouterr().err


def test_invalid_config(tmp_path, capsys):
    path = tmp_path / "nu0.json"
    path.write_text(json.dumps({"horizon": 8, "cost_factor": 0,
                                "players": [{"rate": 1, "rewards": [1]}]}))
    assert main(["solve", str(path)]) == EXIT_INPUT
    assert "cost_factor must be positive" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["solve", str(tmp_path / "nope.json")]) == EXIT_INPUT


def test_sweep_csv(steep_path, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", str(steep_path), "--param", "nu", "--from", "0.5", "--to", "3.5",
                 "--steps", "7", "--grid", "401", "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["nu", "player", "theta_1", "theta_2", "theta_3", "theta_4",
                             "converged"]
    assert len(rows) == 14
    assert [r["player"] for r in rows[:4]] == ["1", "2", "1", "2"]
    theta1 = np.array([float(r["theta_1"]) for r in rows if r["player"] == "1"])
    assert np.all(np.diff(theta1) <= 0)


@pytest.mark.parametrize("args", [["--from", "1", "--to", "2", "--steps", "1"],
                                  ["--from", "2", "--to", "1", "--steps", "5"],
                                  ["--from", "1", "--to", "2", "--steps", "5",
                                   "--param", "T"]])
def test_sweep_rejects_bad_ranges(steep_path, args):
    assert main(["sweep", str(steep_path), *args]) == EXIT_INPUT


def test_sweep_marks_unconverged_rows(flat_path, capsys):
    code = main(["sweep", str(flat_path), "--from", "0.5", "--to", "1", "--steps", "2",
                 "--max-iter", "1", "--grid", "101"])
    assert code == EXIT_NO_CONVERGENCE
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 8 and all(r["converged"] == "False" for r in rows)


def test_simulate_is_byte_identical(steep_path, capsys):
    args = ["simulate", str(steep_path), "--use-solved", "--episodes", "5000", "--seed", "7"]
    assert main(args) == EXIT_OK
    first = capsys.readouterr().out
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out == first
    assert json.loads(first)["seed"] == 7


def test_simulate_with_profile_file(steep_path, tmp_path, capsys):
    profile = tmp_path / "zero.json"
    profile.write_text(json.dumps([[0, 0, 0, 0], [0, 0, 0, 0]]))
    episodes = tmp_path / "ep.csv"
    assert main(["simulate", str(steep_path), "--profile", str(profile), "--episodes", "50",
                 "--dump-episodes", str(episodes)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert all(p["mean"] == 0.0 for p in doc["players"])
    assert len(episodes.read_text().splitlines()) == 1 + 100


def test_simulate_accepts_solve_output(steep_path, tmp_path, capsys):
    sol = tmp_path / "sol.json"
    main(["solve", str(steep_path), "--out", str(sol)])
    assert main(["simulate", str(steep_path), "--profile", str(sol), "--episodes", "100"]) == EXIT_OK


def test_simulate_dimension_mismatch(steep_path, tmp_path):
    profile = tmp_path / "p.json"
    profile.write_text(json.dumps([[0, 0, 0]]))
    assert main(["simulate", str(steep_path), "--profile", str(profile)]) == EXIT_INPUT
    assert main(["simulate", str(steep_path)]) == EXIT_INPUT


def test_verify_passes(flat_path, capsys):
    assert main(["verify", str(flat_path), "--candidates", "100"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["failed_suites"] == []
    assert set(report["suites"]) == {"equilibrium", "quadrature", "asymptotic", "oracle"}
    assert report["suites"]["asymptotic"][0]["value"] <= 0.05


def test_verify_detects_corruption(flat_path, capsys):
    assert main(["verify", str(flat_path), "--candidates", "50",
                 "--inject-corruption"]) == EXIT_VERIFY
    assert "quadrature" in json.loads(capsys.readouterr().out)["failed_suites"]


def test_oracle_check_table_and_dump(tmp_path, capsys):
    dump = tmp_path / "oc.csv"
    assert main(["oracle-check", "--case", "lemma3", "--seed", "4", "--instances", "10",
                 "--dump", str(dump)]) == EXIT_OK
    assert "lemma3" in capsys.readouterr().out
    rows = list(csv.DictReader(dump.open()))
    assert len(rows) == 10 and rows[0]["case"] == "lemma3"
