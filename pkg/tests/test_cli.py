import csv
import json

import pytest

from hurricane_sds import cli, ingest


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def ring6_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    g = ["--out-dir", d, "--seed", 7]
    assert run(*g, "sample", "--case", "ring6", "--method", "sds", "--n", 400, "--out", "sds.jsonl") == 0
    assert run(*g, "sample", "--case", "ring6", "--method", "smc", "--n", 400, "--out", "smc.jsonl") == 0
    assert run(*g, "select", "--pool", d / "sds.jsonl", "--rule", "worst", "--n", 4, "--out", "sel.json") == 0
    assert run(*g, "select", "--pool", d / "sds.jsonl", "--rule", "stratified", "--n", 5, "--out", "test.json") == 0
    assert run(*g, "plan", "--case", "ring6", "--selection", d / "sel.json", "--out", "plan.json") == 0
    assert run(*g, "evaluate", "--case", "ring6", "--plan", d / "plan.json", "--test", d / "test.json", "--out", "ev.csv") == 0
    return d


def test_pipeline_artifacts(ring6_run):
    d = ring6_run
    for name in ("sds.jsonl", "smc.jsonl", "sel.json", "test.json", "plan.json", "ev.csv"):
        assert (d / name).exists()
        man = json.loads((d / (name + ".manifest.json")).read_text())
        assert man["tool_version"] and man["seed"] == 7 and man["outputs"]
    rows = list(csv.DictReader((d / "ev.csv").open()))
    assert rows[-1]["scenario"] == "expected" and len(rows) == 6


def test_analyze_and_compare(ring6_run, tmp_path):
    d = ring6_run
    assert run("analyze", "--pool", d / "sds.jsonl", "--out", tmp_path / "a.csv") == 0
    assert run("report", "--compare", d / "sds.jsonl", d / "smc.jsonl", "--out", tmp_path / "c.csv", "--gnuplot") == 0
    rows = list(csv.DictReader((tmp_path / "c.csv").open()))
    assert {"hill_alpha", "excess_kurtosis", "mmr"} <= set(rows[0])
    assert {r["label"] for r in rows} == {"sds", "smc"}
    assert (tmp_path / "c.csv.gp").exists()


def test_rerun_is_byte_identical(ring6_run, capsys):
    d = ring6_run
    before = (d / "plan.json").read_bytes()
    assert run("rerun", "--manifest", d / "sds.jsonl.manifest.json") == 0
    assert run("rerun", "--manifest", d / "plan.json.manifest.json") == 0
    assert (d / "plan.json").read_bytes() == before
    assert "identical" in capsys.readouterr().out


def test_workers_do_not_change_pool(tmp_path):
    a = run("--workers", 1, "sample", "--case", "coastal12", "--method", "sds", "--n", 5000, "--out", tmp_path / "a.jsonl")
    b = run("--workers", 3, "sample", "--case", "coastal12", "--method", "sds", "--n", 5000, "--out", tmp_path / "b.jsonl")
    assert a == b == 0
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_validate_command(ring6_run, tmp_path, capsys):
    assert run("validate", "--file", ring6_run / "sds.jsonl") == 0
    assert "valid pool" in capsys.readouterr().out
    (tmp_path / "bad.json").write_text('{"schema": "hurricane-sds/grid", "version": 7}')
    assert run("validate", "--file", tmp_path / "bad.json") == 3


def test_exit_codes(tmp_path):
    assert run("nonsense") == 2
    assert run("sample", "--method", "sds", "--n", 5, "--out", tmp_path / "x") == 2  # no grid given
    assert run("analyze", "--pool", tmp_path / "missing.jsonl", "--out", tmp_path / "x.csv") == 3
    assert run("sample", "--case", "ring6", "--method", "sds", "--n", 0, "--out", tmp_path / "x") == 3
    assert run("--workers", 0, "validate", "--file", "x") == 2


def test_solver_error_code(tmp_path, micro2):
    from dataclasses import replace
    import math

    g = micro2.grid
    b = g.buses[1]
    tight = replace(g, buses=(g.buses[0], replace(b, lc_cost=(math.inf,) * g.horizon, demand=(500.0,) * g.horizon)))
    ingest.save_grid(tight, tmp_path / "g.json")
    ingest.save_track(micro2.track, tmp_path / "t.csv")
    assert run("sample", "--grid", tmp_path / "g.json", "--track", tmp_path / "t.csv", "--method", "smc", "--n", 5, "--out", tmp_path / "p.jsonl") == 0
    assert run("select", "--pool", tmp_path / "p.jsonl", "--rule", "random", "--n", 2, "--out", tmp_path / "s.json") == 0
    assert run("plan", "--grid", tmp_path / "g.json", "--selection", tmp_path / "s.json", "--out", tmp_path / "plan.json") == 4


def test_lindev_and_sensitivity(tmp_path, capsys):
    assert run("lindev", "--mesh", 11, "--out", tmp_path / "l.csv") == 0
    assert "cells below 0.1" in capsys.readouterr().out
    rows = list(csv.DictReader((tmp_path / "l.csv").open()))
    assert len(rows) == 7 * 2 * 121
    assert run("sensitivity", "--n", 200, "--out", tmp_path / "s.csv") == 0
    rows = list(csv.DictReader((tmp_path / "s.csv").open()))
    assert len(rows) == 9 * 49 * 7
    assert list(rows[0]) == ["mi", "mj", "si", "sj", "rho", "corr", "n", "seed"]
