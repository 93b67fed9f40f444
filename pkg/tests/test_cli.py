import csv
import json
import logging
import subprocess
import sys

import numpy as np
import pytest

from fpqsm.bench import load_rows
from fpqsm.cli import main
from fpqsm.solver import RunRecord


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- bench ---------------------------------------------------------------------


def test_bench_bundled_config_gives_both_algorithms(in_tmp, capsys):
    # one sample keeps the run short; the row layout does not depend on it
    code = main(["bench", "bounded-small", "--samples", "1", "--out", "res.csv"])
    assert code == 0
    rows = read_csv(in_tmp / "res.csv")
    assert [r["algorithm"] for r in rows] == ["fpqsm"] * 6 + ["qsm"] * 6
    assert all(float(r["k"]) == 2000 for r in rows)
    out = capsys.readouterr().out
    assert "fpqsm (v=0.1)" in out and "results written to res.csv" in out


def test_bench_algorithm_filter_and_overrides(in_tmp):
    code = main([
        "bench", "unbounded-small", "--algorithms", "fpqsm", "--samples", "2",
        "--budget-iters", "50", "--step", "constant:0.5", "--step", "diminishing:2", "--seed", "5",
        "--format", "json", "--out", "res.json",
    ])
    assert code == 0
    rows = load_rows(in_tmp / "res.json")
    assert [(r.algorithm, r.step, r.k_avg) for r in rows] == [("fpqsm", "v=0.5", 50.0), ("fpqsm", "v=2/k", 50.0)]


def test_bench_default_output_name(in_tmp):
    assert main(["bench", "gcfs-small", "--samples", "1", "--budget-iters", "10"]) == 0
    assert len(read_csv(in_tmp / "gcfs-small-results.csv")) == 6


def test_bench_usage_errors(in_tmp, capsys):
    assert main(["bench", "no-such-spec.json"]) == 2
    assert "no such file" in capsys.readouterr().err
    (in_tmp / "broken.json").write_text('{"case": "bounded",\n  "n": }')
    assert main(["bench", "broken.json"]) == 2
    assert "broken.json:2:" in capsys.readouterr().err
    assert main(["bench", "bounded-small", "--step", "linear:3"]) == 2
    assert main(["bench", "bounded-small", "--samples", "0"]) == 2
    (in_tmp / "list.json").write_text("[1, 2]")
    assert main(["bench", "list.json"]) == 2


def test_bench_unwritable_output_is_a_runtime_error(in_tmp, capsys):
    code = main(["bench", "gcfs-small", "--samples", "1", "--budget-iters", "5", "--out", "nowhere/res.csv"])
    assert code == 1
    assert "nowhere/res.csv" in capsys.readouterr().err


# -- solve ---------------------------------------------------------------------


def test_solve_finite_convergence_reports_at_minimum(capsys):
    assert main(["solve", "capped-diminishing"]) == 0
    out = capsys.readouterr().out
    assert "at_minimum" in out and "best value   0.0" in out


def test_solve_oscillation_warns(capsys, caplog):
    with caplog.at_level(logging.WARNING, logger="fpqsm"):
        assert main(["solve", "capped-oscillation"]) == 0
    assert any("non-convergent" in rec.getMessage() for rec in caplog.records)
    assert "iterations   1000" in capsys.readouterr().out


def test_solve_zero_budget_exits_cleanly(capsys):
    assert main(["solve", "capped-oscillation", "--budget-iters", "0"]) == 0
    assert "nothing to do" in capsys.readouterr().out


def test_solve_record_round_trip(in_tmp):
    assert main(["solve", "ball-excess-diminishing", "--out", "run.json"]) == 0
    rec = RunRecord.from_dict(json.loads((in_tmp / "run.json").read_text()))
    assert rec.stop_reason == "at_minimum"
    assert np.linalg.norm(rec.final_point) <= 1.0
    assert rec.config["source"] == "ball-excess-diminishing"


@pytest.mark.parametrize("algorithm", ["fpqsm", "qsm"])
def test_solve_generated_instance(in_tmp, capsys, algorithm):
    (in_tmp / "inst.json").write_text(json.dumps({"case": "bounded", "n": 5, "m": 3, "seed": 1}))
    code = main(["solve", "inst.json", "--algorithm", algorithm, "--budget-iters", "200", "--step", "constant:0.1"])
    assert code == 0
    out = capsys.readouterr().out
    assert f"algorithm    {algorithm}" in out and "iterations   200" in out


def test_solve_explicit_start_and_bad_dimension(capsys):
    assert main(["solve", "capped-oscillation", "--x1", "0.5", "--budget-iters", "3"]) == 0
    assert main(["solve", "capped-oscillation", "--x1", "1,2"]) == 2
    assert main(["solve", "capped-oscillation", "--x1", "one"]) == 2


def test_solve_with_operator_and_domain(in_tmp, capsys):
    cfg = {
        "problem": {
            "kind": "norm", "dim": 2,
            "operator": {"kind": "firm_up", "dim": 2, "alpha": 0.5, "children": [
                {"kind": "halfspace", "dim": 2, "set": {"b": [1.0, 0.0], "threshold": 1.0, "sense": "lower"}}]},
            "domain": {"lower": [-5, -5], "upper": [5, 5]},
        },
        "x1": [4.0, 3.0], "step": "diminishing:1", "max_iter": 20000,
    }
    (in_tmp / "norm.json").write_text(json.dumps(cfg))
    assert main(["solve", "norm.json", "--out", "run.json"]) == 0
    rec = RunRecord.from_dict(json.loads((in_tmp / "run.json").read_text()))
    x = np.asarray(rec.final_point)
    # the minimizer of ||x|| over x_1 >= 1 is (1, 0); the 1/k step creeps along x_2
    assert abs(x[0] - 1.0) < 1e-3
    assert np.linalg.norm(x) < 1.05
    assert np.all(np.abs(x) <= 5.0)


def test_solve_unknown_kind(in_tmp):
    (in_tmp / "weird.json").write_text(json.dumps({"problem": {"kind": "rosenbrock"}}))
    assert main(["solve", "weird.json"]) == 2


# -- project -------------------------------------------------------------------


def test_project_corner(in_tmp, capsys):
    assert main(["project", "region-corner", "--point", "0,0", "--out", "proj.json"]) == 0
    out = capsys.readouterr().out
    assert "converged      True" in out
    rep = json.loads((in_tmp / "proj.json").read_text())
    np.testing.assert_allclose(rep["point"], [1.0, 1.0], atol=1e-9)
    assert rep["max_violation"] <= 1e-9


def test_project_feasible_point_takes_no_sweeps(capsys):
    assert main(["project", "region-corner", "--point", "3 4"]) == 0
    assert "iterations     0" in capsys.readouterr().out


def test_project_reports_infeasibility(in_tmp, capsys):
    region = {"halfspaces": [{"b": [1.0], "threshold": 0.0, "sense": "upper"},
                             {"b": [1.0], "threshold": 1.0, "sense": "lower"}]}
    (in_tmp / "empty.json").write_text(json.dumps(region))
    assert main(["project", "empty.json", "--point", "5", "--tol", "1e-6"]) == 1
    assert "infeasible     True" in capsys.readouterr().out


def test_project_dimension_mismatch():
    assert main(["project", "region-corner", "--point", "1,2,3"]) == 2


# -- entry points --------------------------------------------------------------


def test_module_entry_point(in_tmp):
    proc = subprocess.run(
        [sys.executable, "-m", "fpqsm", "project", "region-corner", "--point", "0,0"],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0 and "converged      True" in proc.stdout


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
