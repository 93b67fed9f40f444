"""Command-line front end: ``fpqsm bench | solve | project``.

Exit codes: 0 success, 1 runtime abort, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .operators import Box, box_projector, identity, operator_from_dict
from .problems import (
    CobbDouglasInstance,
    constraint_halfspaces,
    diagnostic_ball_excess_problem,
    diagnostic_capped_problem,
    diagnostic_norm_problem,
    domain_box,
    initial_points,
    instance_operator,
)
from .projection import ConvexRegion, dykstra_project
from .solver import AlphaSchedule, StepSchedule, detect_oscillation, fpqsm_run, qsm_run
from .subgradients import cobb_douglas_oracle

log = logging.getLogger("fpqsm")

CONFIG_DIR = Path(__file__).with_name("configs")


class UsageError(Exception):
    """Bad input files or flag values (exit code 2)."""


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        bundled = CONFIG_DIR / (p.name if p.suffix else p.name + ".json")
        if bundled.exists():
            p = bundled
        else:
            raise UsageError(f"{path}: no such file")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _parse_point(text: str) -> np.ndarray:
    try:
        vals = [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"cannot parse point {text!r}") from None
    if not vals:
        raise UsageError("empty point")
    return np.array(vals)


def _budget_from(args, max_iter, time_budget):
    if args.budget_iters is not None:
        max_iter = args.budget_iters
    if args.budget_seconds is not None:
        time_budget = args.budget_seconds
    if (max_iter is not None and max_iter < 0) or (time_budget is not None and time_budget < 0):
        raise UsageError("budgets must be nonnegative")
    return max_iter, time_budget


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def cmd_bench(args) -> int:
    raw = _load_json(args.spec)
    if not isinstance(raw, dict):
        raise UsageError(f"{args.spec}: experiment spec must be a JSON object")
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.budget_iters is not None:
        raw["max_iter"], raw["time_budget"] = args.budget_iters, None
    if args.budget_seconds is not None:
        raw["time_budget"] = args.budget_seconds
        if args.budget_iters is None:
            raw["max_iter"] = None
    if args.step:
        raw["steps"] = args.step
    if args.alpha is not None:
        raw["alpha"] = args.alpha
    if args.algorithms:
        raw["algorithms"] = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    if args.samples is not None:
        raw["samples"] = args.samples
    if args.workers is not None:
        raw["workers"] = args.workers
    try:
        spec = bench.ExperimentSpec.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{args.spec}: {exc}") from None

    rows = bench.run_experiment(spec)
    out = args.out or f"{Path(args.spec).stem}-results.{args.format}"
    bench.emit(rows, args.format, out)
    print(bench.format_table(rows))
    print(f"results written to {out}")
    aborted = sum(r.aborted for r in rows)
    if aborted:
        log.error("%d sample(s) aborted", aborted)
        return 1
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _build_problem(cfg: dict):
    """Return (oracle, T, P_D, region, default_x1) from a solve config."""
    prob = cfg.get("problem", cfg)
    kind = prob.get("kind", "cobb_douglas" if ("a0" in prob or "case" in prob) else None)
    if kind == "cobb_douglas":
        body = prob.get("instance", prob)
        inst = CobbDouglasInstance.from_dict(body)
        box = domain_box(inst)
        region = ConvexRegion(tuple(constraint_halfspaces(inst)), box)
        x1 = initial_points(inst, 1, inst.seed if inst.seed is not None else 0)[0]
        return cobb_douglas_oracle(inst), instance_operator(inst), box_projector(box), region, x1
    if kind in ("norm", "capped", "ball_excess"):
        dim = int(prob.get("dim", 1 if kind == "capped" else 2))
        if kind == "norm":
            p = diagnostic_norm_problem(dim)
        elif kind == "capped":
            p = diagnostic_capped_problem(float(prob.get("alpha", 1.0)), dim)
        else:
            p = diagnostic_ball_excess_problem(float(prob.get("radius", 1.0)), dim)
        T = operator_from_dict(prob["operator"]) if "operator" in prob else identity(dim)
        if "domain" in prob:
            box = Box.from_dict(prob["domain"])
            P_D, region = box_projector(box), ConvexRegion((), box)
        else:
            P_D, region = identity(dim), None
        return p.oracle, T, P_D, region, np.ones(dim)
    raise UsageError(f"unknown problem kind {kind!r}")


def cmd_solve(args) -> int:
    cfg = _load_json(args.instance)
    if not isinstance(cfg, dict):
        raise UsageError(f"{args.instance}: solve config must be a JSON object")
    try:
        oracle, T, P_D, region, x1 = _build_problem(cfg)
        step = StepSchedule.parse(args.step or cfg.get("step", "diminishing:0.1"))
        alpha = AlphaSchedule.constant(args.alpha if args.alpha is not None else cfg.get("alpha", 0.5))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.instance}: {exc}") from None
    if args.x1 is not None:
        x1 = _parse_point(args.x1)
    elif "x1" in cfg:
        x1 = np.asarray(cfg["x1"], dtype=float)
    if x1.shape != (T.dim,):
        raise UsageError(f"x1 has dimension {x1.shape[0]}, problem has {T.dim}")
    max_iter, time_budget = _budget_from(args, cfg.get("max_iter"), cfg.get("time_budget"))
    if max_iter is None and time_budget is None:
        max_iter = 1000
    if max_iter == 0 or time_budget == 0:
        print("budget is zero; nothing to do")
        return 0

    algorithm = args.algorithm or cfg.get("algorithm", "fpqsm")
    if algorithm == "fpqsm":
        rec = fpqsm_run(oracle, T, P_D, step, alpha, x1, max_iter=max_iter, time_budget=time_budget)
    elif algorithm == "qsm":
        rec = qsm_run(oracle, region, step, x1, max_iter=max_iter, time_budget=time_budget, residual_op=T)
    else:
        raise UsageError(f"unknown algorithm {algorithm!r}")

    shown = np.array2string(rec.best_point[:8], precision=6)
    if rec.best_point.shape[0] > 8:
        shown = shown[:-1] + " ...]"
    print(f"algorithm    {algorithm}")
    print(f"iterations   {rec.iterations}")
    print(f"stop reason  {rec.stop_reason}")
    print(f"best value   {rec.best_value!r}")
    print(f"best point   {shown}")
    print(f"residual     {T.residual(rec.best_point)!r}")
    print(f"wall time    {rec.wall_time:.3f} s")
    if detect_oscillation(rec):
        log.warning("trace is non-convergent: the last %d iterates alternate between two points", len(rec.tail_points))
    if args.out:
        d = rec.to_dict()
        d["config"]["source"] = str(args.instance)
        Path(args.out).write_text(json.dumps(d))
    if rec.aborted:
        log.error("run aborted: %s", rec.message)
        return 1
    return 0


# ---------------------------------------------------------------------------
# project
# ---------------------------------------------------------------------------


def cmd_project(args) -> int:
    raw = _load_json(args.region)
    try:
        region = ConvexRegion.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.region}: {exc}") from None
    z = _parse_point(args.point)
    if z.shape != (region.dim,):
        raise UsageError(f"point has dimension {z.shape[0]}, region has {region.dim}")
    rep = dykstra_project(region, z, args.tol, args.max_sweeps)
    print(f"point          {np.array2string(rep.point, precision=10)}")
    print(f"iterations     {rep.iterations}")
    print(f"max_violation  {rep.max_violation:.3e}")
    print(f"achieved_tol   {rep.achieved_tol:.3e}")
    print(f"converged      {rep.converged}")
    print(f"infeasible     {rep.infeasible}")
    if args.out:
        Path(args.out).write_text(json.dumps(rep.to_dict()))
    return 1 if rep.infeasible else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpqsm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def budget_flags(p):
        p.add_argument("--budget-iters", type=int, metavar="N")
        p.add_argument("--budget-seconds", type=float, metavar="S")
        p.add_argument("--alpha", type=float)
        p.add_argument("--seed", type=int)

    b = sub.add_parser("bench", help="run a benchmark experiment from a JSON spec")
    b.add_argument("spec", help="experiment JSON (or the name of a bundled config)")
    budget_flags(b)
    b.add_argument("--step", action="append", metavar="RULE", help="constant:<v> or diminishing:<c>; repeatable")
    b.add_argument("--algorithms", metavar="LIST", help="comma-separated subset of fpqsm,qsm")
    b.add_argument("--samples", type=int)
    b.add_argument("--workers", type=int)
    b.add_argument("--out", metavar="PATH")
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("solve", help="run one solver on one problem")
    s.add_argument("instance", help="problem/instance JSON")
    budget_flags(s)
    s.add_argument("--algorithm", choices=("fpqsm", "qsm"))
    s.add_argument("--step", metavar="RULE")
    s.add_argument("--x1", metavar="POINT", help="starting point, e.g. '1.5' or '3,0'")
    s.add_argument("--out", metavar="PATH", help="write the run record as JSON")
    s.set_defaults(func=cmd_solve)

    p = sub.add_parser("project", help="project a point onto a half-space/box region")
    p.add_argument("region", help="region JSON")
    p.add_argument("--point", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-sweeps", type=int, default=100_000)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_project)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
