"""Experiment harness for the Cobb-Douglas benchmark.

One :class:`ExperimentSpec` fixes a problem case, an instance seed, a list
of step rules and a budget. :func:`run_experiment` solves the instance from
``samples`` starting points with every (algorithm, step rule) pair and
reports, per pair, the mean iteration count together with

* ``V_func``: mean objective value of the returned solutions, and
* ``V_dist``: mean fixed-point residual ``||x - T(x)||`` of those solutions.

Both algorithms see the same instance and the same starting points.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .operators import Operator, box_projector
from .problems import (
    CASES,
    cobb_douglas_value,
    constraint_halfspaces,
    domain_box,
    gen_case,
    initial_points,
    instance_operator,
)
from .projection import DEFAULT_MAX_SWEEPS, ConvexRegion
from .solver import AlphaSchedule, RunRecord, StepSchedule, fpqsm_run, qsm_run
from .subgradients import cobb_douglas_oracle

__all__ = [
    "ALGORITHMS",
    "COLUMNS",
    "DEFAULT_STEPS",
    "ExperimentSpec",
    "ResultRow",
    "emit",
    "format_table",
    "load_rows",
    "metrics",
    "run_experiment",
    "run_sample",
]

ALGORITHMS = ("fpqsm", "qsm")
COLUMNS = ("algorithm", "step", "k", "V_func", "V_dist", "aborted")
DEFAULT_STEPS = (
    "constant:0.1",
    "constant:0.01",
    "constant:0.001",
    "diminishing:0.1",
    "diminishing:0.01",
    "diminishing:0.001",
)


@dataclass(frozen=True)
class ExperimentSpec:
    case: str
    n: int
    m: int
    steps: tuple[StepSchedule, ...] = tuple(StepSchedule.parse(s) for s in DEFAULT_STEPS)
    alpha: float = 0.5
    samples: int = 8
    max_iter: int | None = None
    time_budget: float | None = None
    seed: int = 0
    algorithms: tuple[str, ...] = ALGORITHMS
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    workers: int = 1

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}; expected one of {CASES}")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.max_iter is None and self.time_budget is None:
            raise ValueError("an experiment needs max_iter or time_budget")
        steps = tuple(StepSchedule.parse(s) if isinstance(s, str) else s for s in self.steps)
        if not steps:
            raise ValueError("at least one step rule is required")
        algs = tuple(self.algorithms)
        bad = set(algs) - set(ALGORITHMS)
        if bad or not algs:
            raise ValueError(f"algorithms must be a nonempty subset of {ALGORITHMS}, got {algs}")
        if self.case == "gcfs":
            # no tractable projection onto the generalized feasible set
            algs = tuple(a for a in algs if a != "qsm") or ("fpqsm",)
        AlphaSchedule.constant(self.alpha)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "algorithms", algs)

    @property
    def time_mode(self) -> bool:
        return self.time_budget is not None

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "n": self.n,
            "m": self.m,
            "steps": [str(s) for s in self.steps],
            "alpha": self.alpha,
            "samples": self.samples,
            "max_iter": self.max_iter,
            "time_budget": self.time_budget,
            "seed": self.seed,
            "algorithms": list(self.algorithms),
            "max_sweeps": self.max_sweeps,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        d = dict(d)
        for key in ("steps", "algorithms"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    step: str
    k_avg: float
    V_func: float
    V_dist: float
    aborted: int = 0
    wall_time: float = field(default=0.0, compare=False)
    inner_time: float = field(default=0.0, compare=False)

    def as_cells(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "step": self.step,
            "k": self.k_avg,
            "V_func": self.V_func,
            "V_dist": self.V_dist,
            "aborted": self.aborted,
        }


def metrics(solutions: Sequence, f: Callable, T: Operator) -> tuple[float, float]:
    """Mean objective value and mean fixed-point residual over ``solutions``."""
    if len(solutions) == 0:
        raise ValueError("metrics need at least one solution")
    vals = [float(f(np.asarray(x, dtype=float))) for x in solutions]
    dists = [T.residual(x) for x in solutions]
    return math.fsum(vals) / len(vals), math.fsum(dists) / len(dists)


class _Setup:
    """Instance, operators and starting points derived from a spec."""

    def __init__(self, spec: ExperimentSpec):
        self.inst = gen_case(spec.case, spec.n, spec.m, spec.seed)
        self.T = instance_operator(self.inst)
        self.P_D = box_projector(domain_box(self.inst))
        self.oracle = cobb_douglas_oracle(self.inst)
        self.region = ConvexRegion(tuple(constraint_halfspaces(self.inst)), domain_box(self.inst))
        self.starts = initial_points(self.inst, spec.samples, spec.seed)


def _solve(setup: _Setup, spec: ExperimentSpec, algorithm: str, step: StepSchedule, i: int) -> RunRecord:
    x1 = setup.starts[i]
    if algorithm == "fpqsm":
        return fpqsm_run(
            setup.oracle, setup.T, setup.P_D, step, AlphaSchedule.constant(spec.alpha), x1,
            max_iter=spec.max_iter, time_budget=spec.time_budget, record_residuals=False,
            trace_every=max(1, spec.max_iter or 1000),
        )
    return qsm_run(
        setup.oracle, setup.region, step, x1,
        max_iter=spec.max_iter, time_budget=spec.time_budget, max_sweeps=spec.max_sweeps,
        record_residuals=False, trace_every=max(1, spec.max_iter or 1000),
    )


def run_sample(spec: ExperimentSpec, algorithm: str, step: StepSchedule, i: int) -> RunRecord:
    """Solve sample ``i`` of ``spec`` from scratch (used by worker processes)."""
    return _solve(_Setup(spec), spec, algorithm, step, i)


def _pool_task(args):
    spec_dict, algorithm, step_text, i = args
    return run_sample(ExperimentSpec.from_dict(spec_dict), algorithm, StepSchedule.parse(step_text), i)


def _row(setup: _Setup, algorithm: str, step: StepSchedule, records: list[RunRecord]) -> ResultRow:
    ok = [r for r in records if not r.aborted]
    k_avg = math.fsum(r.iterations for r in records) / len(records)
    # last iterate, not the best-valued one: the best value is often the
    # infeasible starting point, which says nothing about where the run ended
    solved = [r.final_point for r in ok if r.iterations > 0]
    if solved:
        v_func, v_dist = metrics(solved, setup.oracle.value, setup.T)
    else:
        v_func = v_dist = math.nan
    return ResultRow(
        algorithm, step.label, k_avg, v_func, v_dist,
        aborted=len(records) - len(ok),
        wall_time=math.fsum(r.wall_time for r in records),
        inner_time=math.fsum(r.inner_time for r in records),
    )


def run_experiment(spec: ExperimentSpec, records_out: list | None = None) -> list[ResultRow]:
    """One row per (algorithm, step rule), in declaration order.

    Samples run in parallel only when ``spec.workers > 1`` and the budget is
    an iteration count; time-budgeted samples always run one after another.
    When ``records_out`` is a list, every :class:`RunRecord` is appended to it.
    """
    setup = _Setup(spec)
    jobs = [(alg, step) for alg in spec.algorithms for step in spec.steps]
    if spec.workers > 1 and not spec.time_mode:
        sd = spec.to_dict()
        tasks = [(sd, alg, str(step), i) for alg, step in jobs for i in range(spec.samples)]
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            flat = list(pool.map(_pool_task, tasks))
        grouped = [flat[j * spec.samples:(j + 1) * spec.samples] for j in range(len(jobs))]
    else:
        grouped = [[_solve(setup, spec, alg, step, i) for i in range(spec.samples)] for alg, step in jobs]

    rows = []
    for (alg, step), records in zip(jobs, grouped):
        if records_out is not None:
            records_out.extend(records)
        rows.append(_row(setup, alg, step, records))
    return rows


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    # shortest string that parses back to the same double
    return repr(float(v))


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        cells = r.as_cells()
        w.writerow([_fmt(cells[c]) for c in COLUMNS])
    return buf.getvalue()


def rows_to_json(rows: Sequence[ResultRow]) -> str:
    def enc(v):
        return None if isinstance(v, float) and math.isnan(v) else v

    return json.dumps([{c: enc(r.as_cells()[c]) for c in COLUMNS} for r in rows], indent=2) + "\n"


def emit(rows: Sequence[ResultRow], fmt: str, path: str | os.PathLike) -> None:
    """Write ``rows`` as CSV or JSON with a fixed column order."""
    if fmt == "csv":
        text = rows_to_csv(rows)
    elif fmt == "json":
        text = rows_to_json(rows)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {os.fspath(path)!r}: {exc.strerror}") from exc


def load_rows(path: str | os.PathLike) -> list[ResultRow]:
    """Read rows written by :func:`emit` (format chosen by file content)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        recs = json.loads(text)
        return [
            ResultRow(
                d["algorithm"], d["step"], float(d["k"]),
                math.nan if d["V_func"] is None else float(d["V_func"]),
                math.nan if d["V_dist"] is None else float(d["V_dist"]),
                int(d["aborted"]),
            )
            for d in recs
        ]
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != COLUMNS:
        raise ValueError(f"{os.fspath(path)!r}: unexpected columns {reader.fieldnames}")
    return [
        ResultRow(d["algorithm"], d["step"], float(d["k"]), float(d["V_func"]), float(d["V_dist"]), int(d["aborted"]))
        for d in reader
    ]


def format_table(rows: Sequence[ResultRow]) -> str:
    """Human-readable summary: one line per row with k, V_func and V_dist."""
    lines = [f"{'':<20} {'k':>10} {'V_func':>14} {'V_dist':>16}"]
    for r in rows:
        name = f"{r.algorithm} ({r.step})"
        if math.isnan(r.V_func):
            vf, vd = "---", "---"
        else:
            vf, vd = f"{r.V_func:.8f}", f"{r.V_dist:.8e}"
        flag = f"  [{r.aborted} aborted]" if r.aborted else ""
        lines.append(f"{name:<20} {r.k_avg:>10.1f} {vf:>14} {vd:>16}{flag}")
    return "\n".join(lines)
