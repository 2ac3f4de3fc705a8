import argparse
import json
import subprocess
import sys

import pytest

from flexdro.cli import build_parser, main

from conftest import fixture_path


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_validate_summary(capsys):
    assert run_cli("validate", "fixtures/case6.json") == 0
    out = capsys.readouterr().out
    assert out.startswith("ok: 6 buses, 3 generators, 1 storage, 7 lines")


def test_validate_matpower_with_sidecar(capsys):
    assert run_cli("validate", fixture_path("case14.m"), "--storage", fixture_path("case14_storage.json")) == 0
    assert "14 buses, 5 generators, 1 storage, 20 lines" in capsys.readouterr().out


def test_toy_assess_line(capsys):
    assert run_cli("assess", "fixtures/toy1.json", "--mode", "both", "--beta", "0.05") == 0
    assert capsys.readouterr().out == "lambda_det=0.500000 lambda_sto=0.505000\n"


def test_assess_outputs(tmp_path, capsys):
    out, trace = tmp_path / "a.csv", tmp_path / "t.csv"
    assert run_cli("assess", "toy1.json", "--out", out, "--trace", trace) == 0
    rows = out.read_text().splitlines()
    assert rows[1] == "1,0.500000,0.505000,1,2,true,true,,"[: len(rows[1])] or rows[1].startswith("1,0.500000,0.505000,")
    assert rows[1].endswith(",,")
    assert trace.read_text().splitlines()[0] == "mode,iteration,lambda,gamma_norm,psi,check"


def test_assess_interval_state(tmp_path, capsys):
    state = tmp_path / "s.json"
    state.write_text(json.dumps({"p_prev": [5.0], "e_prev": [], "load": [4.0]}))
    assert run_cli("assess", "toy1.json", "--interval-state", state, "--mode", "det") == 0
    # load 4 with the case deviation of 10 MW: 4 - 10 lam >= 0
    assert capsys.readouterr().out == "lambda_det=0.400000\n"
    state.write_text(json.dumps({"p_prev": [50.0], "e_prev": []}))
    assert run_cli("assess", "toy1.json", "--interval-state", state) == 2


def test_assess_not_converged_exit(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dro": {"max_iter": 1}, "det": {"max_iter": 1}}))
    assert run_cli("assess", "toy1.json", "--config", cfg) == 3


def test_ptdf(tmp_path):
    out = tmp_path / "sf.csv"
    assert run_cli("ptdf", "case6.json", "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "bus,L1,L2,L3,L4,L5,L6,L7"
    assert len(lines) == 7
    assert lines[1] == "1,0,0,0,0,0,0,0"


def test_ptdf_single_bus(capsys):
    assert run_cli("ptdf", "toy1.json") == 0
    assert capsys.readouterr().out == "bus\n1\n"


def test_oracle(capsys):
    assert run_cli("oracle", "toy1.json", "--lambda", "0.55") == 0
    out = dict(line.split("=") for line in capsys.readouterr().out.splitlines())
    assert list(out) == ["max_vertex_phi", "worst_expectation", "lambda_det", "lambda_sto"]
    # the lambda values come from bisection
    for key, want in [("max_vertex_phi", 0.5), ("worst_expectation", 0.5), ("lambda_det", 0.5),
                      ("lambda_sto", 0.505)]:
        assert float(out[key]) == pytest.approx(want, abs=2e-6)


def test_oracle_rejects_large_cases(tmp_path, capsys):
    n = 13
    case = {"base_mva": 100,
            "buses": [{"id": i + 1, "load_mw": 1.0} for i in range(n)],
            "generators": [{"id": "g", "bus": 1, "p_min": 0, "p_max": 50, "ramp_up": 50, "ramp_down": 50,
                            "cost": 1}],
            "lines": [{"id": f"l{i}", "from": i, "to": i + 1, "reactance": 0.1, "flow_limit": 1000} for i in range(1, n)]}
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(case))
    assert run_cli("oracle", path, "--lambda", "0.1") == 2
    assert "limit" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["validate"],
    ["assess", "toy1.json", "--bogus"],
    ["run", "case6.json", "--mode", "fast"],
    ["oracle", "toy1.json"],
    ["frobnicate"],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1
    assert "usage:" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["validate", "missing.json"],
    ["run", "case6.json", "--config", "missing_config.json"],
    ["assess", "case6.json", "--beta", "-1"],
    ["oracle", "toy1.json", "--lambda", "2"],
])
def test_data_errors(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_bad_case_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"base_mva": 100,\n "buses": [}\n')
    assert run_cli("validate", bad) == 2
    assert "line 2" in capsys.readouterr().err


def test_bad_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"intervals": 2, "colour": 1}')
    assert run_cli("run", "case6.json", "--config", cfg) == 2
    assert "colour" in capsys.readouterr().err


def test_run_writes_one_row_per_interval(tmp_path):
    out = tmp_path / "out.csv"
    assert run_cli("run", "case6.json", "--config", "run24.json", "--out", out, "--intervals", "3") == 0
    assert len(out.read_text().splitlines()) == 4


def test_run_halt_writes_partial(tmp_path, capsys):
    case = tmp_path / "ramp.json"
    case.write_text(json.dumps({
        "base_mva": 100, "buses": [{"id": 1, "load_mw": 5}],
        "generators": [{"id": "g", "bus": 1, "p_min": 0, "p_max": 10, "ramp_up": 1, "ramp_down": 1,
                        "cost": 1}]}))
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"intervals": 3, "load_profile": [0.5, 1.0, 1.0], "mode": "det"}))
    out = tmp_path / "o.csv"
    assert run_cli("run", case, "--config", cfg, "--out", out) == 2
    assert len(out.read_text().splitlines()) == 2
    assert "halted" in capsys.readouterr().err


def test_run_scenarios_and_pairs(tmp_path):
    sc, pairs = tmp_path / "s.csv", tmp_path / "p.csv"
    assert run_cli("run", "outlier2.json", "--config", "run_outlier.json", "--scenarios", "4",
                   "--scenario-out", sc, "--out", tmp_path / "o.csv") == 0
    assert len(sc.read_text().splitlines()) == 1 + 3 * 4
    assert run_cli("run", "ess_small.json", "--config", "run_ess.json", "--paired-out", pairs,
                   "--out", tmp_path / "o2.csv") == 0
    assert len(pairs.read_text().splitlines()) == 7


def test_flags_override_config(tmp_path):
    out = tmp_path / "o.csv"
    assert run_cli("run", "case6.json", "--config", "run24.json", "--intervals", "2", "--mode", "det",
                   "--out", out) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 3 and rows[1].split(",")[2] == ""


def subcommands():
    parser = build_parser()
    action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return action.choices


@pytest.mark.parametrize("name", ["validate", "ptdf", "assess", "run", "oracle"])
def test_help_documents_every_flag(name, capsys):
    sp = subcommands()[name]
    with pytest.raises(SystemExit) as exc:
        main([name, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for action in sp._actions:
        for opt in action.option_strings:
            assert opt in text
        if action.dest != "help":
            assert action.help, f"{name}: {action.dest} has no help text"


def test_command_set():
    assert set(subcommands()) == {"validate", "ptdf", "assess", "run", "oracle"}


def test_module_entry_point(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        proc = subprocess.run([sys.executable, "-m", "flexdro", "run", "case6.json", "--config", "run24.json",
                               "--intervals", "4", "--out", str(out)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    assert a.read_bytes() == b.read_bytes()
