import json
import math
import time

import numpy as np
import pytest

from fpqsm import bench
from fpqsm.bench import ExperimentSpec, ResultRow, emit, load_rows, metrics, run_experiment
from fpqsm.operators import HalfSpace, halfspace_projector, identity
from fpqsm.solver import StepSchedule


def tiny(**kw):
    base = dict(case="bounded", n=4, m=3, steps=("constant:0.1", "diminishing:0.1"), samples=2, max_iter=60, seed=3)
    base.update(kw)
    return ExperimentSpec(**base)


def test_metrics_examples():
    sols = [np.array([2.0])] * 8
    assert metrics(sols, lambda x: -1.0, identity(1)) == (-1.0, 0.0)
    vf, vd = metrics([np.array([0.0]), np.array([1.0])], lambda x: -2.0 * x[0], identity(1))
    assert vf == -1.0 and vd == 0.0
    T = halfspace_projector(HalfSpace((1.0,), 0.0))
    _, vd = metrics([np.array([3.0]), np.array([-1.0])], lambda x: 0.0, T)
    assert vd == 1.5
    with pytest.raises(ValueError):
        metrics([], lambda x: 0.0, identity(1))


def test_spec_validation():
    with pytest.raises(ValueError):
        tiny(samples=0)
    with pytest.raises(ValueError):
        tiny(max_iter=None)
    with pytest.raises(ValueError):
        tiny(algorithms=("fpqsm", "sgd"))
    with pytest.raises(ValueError):
        tiny(case="sparse")
    with pytest.raises(ValueError, match="unknown experiment fields"):
        ExperimentSpec.from_dict({**tiny().to_dict(), "budget": 3})


def test_spec_dict_round_trip():
    spec = tiny(time_budget=1.5, max_iter=None, alpha=0.25)
    assert ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_gcfs_case_drops_the_projection_baseline():
    spec = tiny(case="gcfs")
    assert spec.algorithms == ("fpqsm",)
    rows = run_experiment(spec)
    assert [r.algorithm for r in rows] == ["fpqsm", "fpqsm"]


def test_zero_iterations_give_zero_k():
    rows = run_experiment(tiny(max_iter=0))
    assert len(rows) == 4
    for r in rows:
        assert r.k_avg == 0 and math.isnan(r.V_func) and r.aborted == 0


def test_rows_follow_declaration_order():
    rows = run_experiment(tiny())
    assert [(r.algorithm, r.step) for r in rows] == [
        ("fpqsm", "v=0.1"), ("fpqsm", "v=0.1/k"), ("qsm", "v=0.1"), ("qsm", "v=0.1/k"),
    ]
    assert all(r.k_avg == 60 for r in rows)


def test_same_spec_gives_identical_csv_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit(run_experiment(tiny()), "csv", a)
    emit(run_experiment(tiny()), "csv", b)
    assert a.read_bytes() == b.read_bytes()
    emit(run_experiment(tiny(seed=4)), "csv", b)
    assert a.read_bytes() != b.read_bytes()


def test_worker_processes_match_serial_results():
    spec = tiny(algorithms=("fpqsm",))
    serial = run_experiment(spec)
    pooled = run_experiment(tiny(algorithms=("fpqsm",), workers=2))
    assert [r.as_cells() for r in serial] == [r.as_cells() for r in pooled]


def test_both_algorithms_see_the_same_starting_points():
    records = []
    run_experiment(tiny(), records_out=records)
    starts = [tuple(r.initial_point) for r in records]
    assert len(set(starts)) == 2
    assert starts[:2] == starts[2:4] == starts[4:6] == starts[6:8]


def test_aborted_samples_are_counted_without_spoiling_the_row():
    spec = tiny(algorithms=("fpqsm",), steps=("constant:0.1",))
    records = []
    run_experiment(spec, records_out=records)
    records[1].stop_reason = "infeasible"
    row = bench._row(bench._Setup(spec), "fpqsm", spec.steps[0], records)
    assert row.aborted == 1
    good = metrics([records[0].final_point], bench._Setup(spec).oracle.value, bench._Setup(spec).T)
    assert (row.V_func, row.V_dist) == good


@pytest.mark.env_sensitive
def test_time_budget_accounting_matches_wall_time():
    spec = tiny(n=10, m=10, algorithms=("qsm", "fpqsm"), steps=("constant:0.01",), max_iter=None, time_budget=0.3)
    records = []
    t0 = time.perf_counter()
    run_experiment(spec, records_out=records)
    elapsed = time.perf_counter() - t0
    accounted = sum(r.wall_time for r in records)
    assert accounted == pytest.approx(elapsed, rel=0.05)
    for r in records:
        assert r.wall_time == pytest.approx(0.3, rel=0.05)
        assert r.inner_time <= r.wall_time
    assert any(r.inner_time > 0 for r in records if r.algorithm == "qsm")


# -- output --------------------------------------------------------------------


ROW = ResultRow("fpqsm", "v=0.1", 6254.0, -0.00092536, 1.21925957e-13)


def test_one_row_csv(tmp_path):
    path = tmp_path / "out.csv"
    emit([ROW], "csv", path)
    lines = path.read_text().splitlines()
    assert lines[0] == "algorithm,step,k,V_func,V_dist,aborted"
    assert len(lines) == 2 and lines[1] == "fpqsm,v=0.1,6254.0,-0.00092536,1.21925957e-13,0"


def test_full_precision_rendering(tmp_path):
    row = ResultRow("fpqsm", "v=0.1", 1.0, -0.00092189, 3.18571477e-13)
    path = tmp_path / "out.csv"
    emit([row], "csv", path)
    text = path.read_text()
    assert "3.18571477" in text and "-0.00092189" in text
    assert load_rows(path)[0] == row


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_rows_round_trip(tmp_path, fmt):
    rows = [ROW, ResultRow("qsm", "v=0.001/k", 0.0, math.nan, math.nan, aborted=8)]
    path = tmp_path / f"rows.{fmt}"
    emit(rows, fmt, path)
    back = load_rows(path)
    assert back[0] == ROW
    assert back[1].algorithm == "qsm" and math.isnan(back[1].V_func) and back[1].aborted == 8
    if fmt == "json":
        assert json.loads(path.read_text())[1]["V_dist"] is None


def test_write_failure_names_the_path(tmp_path):
    bad = tmp_path / "missing-dir" / "x.csv"
    with pytest.raises(OSError, match="missing-dir"):
        emit([ROW], "csv", bad)
    with pytest.raises(ValueError):
        emit([ROW], "xml", tmp_path / "x.xml")


def test_table_formatting():
    text = bench.format_table([ROW, ResultRow("qsm", "v=0.1", 0.0, math.nan, math.nan, aborted=2)])
    assert "fpqsm (v=0.1)" in text and "1.21925957e-13" in text
    assert "---" in text and "[2 aborted]" in text


def test_default_steps_cover_both_rule_families():
    kinds = [StepSchedule.parse(s).kind for s in bench.DEFAULT_STEPS]
    assert kinds.count("constant") == 3 and kinds.count("diminishing") == 3
