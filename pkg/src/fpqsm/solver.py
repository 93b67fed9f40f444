"""Fixed-point quasiconvex subgradient method and the projection baseline.

The fixed-point method replaces the metric projection onto the constraint
set with one evaluation of a firmly nonexpansive map ``T`` whose fixed
points are the constraint set::

    g_k      unit quasi-subgradient of f at x_k
    x_{k+1} = P_D(alpha_k x_k + (1 - alpha_k) T(x_k - v_k g_k))

The baseline (QSM) instead projects ``x_k - v_k g_k`` onto the feasible set,
approximately, with tolerance ``v_k / 10``.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .operators import Operator, as_point
from .projection import DEFAULT_MAX_SWEEPS, ConvexRegion, dykstra_project
from .subgradients import QuasiSubgradientOracle

__all__ = [
    "AlphaSchedule",
    "DiagnosticOracle",
    "RunRecord",
    "StepSchedule",
    "detect_oscillation",
    "fpqsm_run",
    "fpqsm_step",
    "distance_decrease_check",
    "qsm_run",
    "rate_bound",
    "rate_bound_check",
    "constant_step_value_bound",
]

TAIL = 100


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``v_k`` for ``k = 1, 2, ...``: constant ``v`` or ``c / k``."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("constant", "diminishing"):
            raise ValueError(f"unknown step rule {self.kind!r}")
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValueError("step parameter must be positive and finite")
        object.__setattr__(self, "value", float(self.value))

    @classmethod
    def constant(cls, v: float) -> "StepSchedule":
        return cls("constant", v)

    @classmethod
    def diminishing(cls, c: float) -> "StepSchedule":
        return cls("diminishing", c)

    @classmethod
    def parse(cls, text: str) -> "StepSchedule":
        """Parse ``constant:<v>`` or ``diminishing:<c>``."""
        kind, sep, val = text.partition(":")
        if not sep:
            raise ValueError(f"step rule must look like 'constant:0.1', got {text!r}")
        try:
            return cls(kind.strip(), float(val))
        except ValueError as exc:
            raise ValueError(f"bad step rule {text!r}: {exc}") from None

    def __call__(self, k: int) -> float:
        if self.kind == "constant":
            return self.value
        return self.value / k

    @property
    def label(self) -> str:
        v = f"{self.value:g}"
        return f"v={v}" if self.kind == "constant" else f"v={v}/k"

    def __str__(self) -> str:
        return f"{self.kind}:{self.value!r}"


@dataclass(frozen=True)
class AlphaSchedule:
    """Krasnosel'skii-Mann weights ``alpha_k`` in (0, 1]."""

    value: float | None = 0.5
    generator: Callable[[int], float] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.generator is None:
            if self.value is None or not 0.0 < self.value < 1.0:
                raise ValueError("constant alpha must lie in (0, 1)")

    @classmethod
    def constant(cls, alpha: float) -> "AlphaSchedule":
        return cls(float(alpha))

    @classmethod
    def sequence(cls, gen: Callable[[int], float]) -> "AlphaSchedule":
        return cls(None, gen)

    def __call__(self, k: int) -> float:
        if self.generator is None:
            return self.value
        a = float(self.generator(k))
        if not 0.0 < a <= 1.0:
            raise ValueError(f"alpha_{k} = {a} outside (0, 1]")
        return a


@dataclass(frozen=True)
class DiagnosticOracle:
    """Known solution data for problems used to check the convergence bounds:
    optimal value, a minimizer, and Hoelder constants ``|f(z) - f(x*)| <= L ||z - x*||^beta``."""

    f_star: float
    x_star: np.ndarray
    L: float
    beta: float

    def __post_init__(self):
        if not (self.L > 0 and self.beta > 0):
            raise ValueError("L and beta must be positive")
        object.__setattr__(self, "x_star", as_point(self.x_star))


@dataclass
class RunRecord:
    """Trace of one solver run.

    ``value_trace[j]`` and ``residual_trace[j]`` belong to iterate
    ``x_{1 + j * trace_every}``. ``best_value``/``best_point`` track the best
    examined iterate exactly, whatever the downsampling.
    """

    algorithm: str
    iterations: int
    best_value: float
    best_point: np.ndarray
    final_point: np.ndarray
    initial_point: np.ndarray
    value_trace: list[float]
    residual_trace: list[float]
    wall_time: float
    stop_reason: str
    inner_time: float = 0.0
    trace_every: int = 1
    point_trace: list[np.ndarray] | None = None
    tail_points: list[np.ndarray] = field(default_factory=list)
    message: str = ""
    config: dict = field(default_factory=dict)

    @property
    def aborted(self) -> bool:
        return self.stop_reason in ("nonfinite", "infeasible")

    def to_dict(self) -> dict:
        d = {
            "algorithm": self.algorithm,
            "iterations": self.iterations,
            "best_value": self.best_value,
            "best_point": self.best_point.tolist(),
            "final_point": self.final_point.tolist(),
            "initial_point": self.initial_point.tolist(),
            "value_trace": list(self.value_trace),
            "residual_trace": list(self.residual_trace),
            "wall_time": self.wall_time,
            "inner_time": self.inner_time,
            "stop_reason": self.stop_reason,
            "trace_every": self.trace_every,
            "message": self.message,
            "config": self.config,
        }
        if self.point_trace is not None:
            d["point_trace"] = [p.tolist() for p in self.point_trace]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        pts = d.get("point_trace")
        return cls(
            algorithm=d["algorithm"],
            iterations=d["iterations"],
            best_value=d["best_value"],
            best_point=np.asarray(d["best_point"], dtype=float),
            final_point=np.asarray(d["final_point"], dtype=float),
            initial_point=np.asarray(d["initial_point"], dtype=float),
            value_trace=list(d["value_trace"]),
            residual_trace=list(d["residual_trace"]),
            wall_time=d["wall_time"],
            stop_reason=d["stop_reason"],
            inner_time=d.get("inner_time", 0.0),
            trace_every=d.get("trace_every", 1),
            point_trace=None if pts is None else [np.asarray(p, dtype=float) for p in pts],
            message=d.get("message", ""),
            config=d.get("config", {}),
        )


def fpqsm_step(x, g, v: float, alpha: float, T: Operator, P_D: Operator) -> np.ndarray:
    """One update ``P_D(alpha x + (1 - alpha) T(x - v g))``."""
    x = as_point(x, T.dim)
    g = as_point(g, T.dim)
    if abs(float(np.linalg.norm(g)) - 1.0) > 1e-12:
        raise ValueError("g must be a unit vector")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if P_D.dim != T.dim:
        raise ValueError("T and P_D dimensions differ")
    return P_D.fn(alpha * x + (1.0 - alpha) * T.fn(x - v * g))


def _check_budget(max_iter, time_budget):
    if max_iter is None and time_budget is None:
        raise ValueError("give max_iter, time_budget, or both")
    if max_iter is not None and max_iter < 0:
        raise ValueError("max_iter must be nonnegative")
    if time_budget is not None and time_budget < 0:
        raise ValueError("time_budget must be nonnegative")


class _Tracer:
    """Shared bookkeeping for both solvers."""

    def __init__(self, x1, trace_every, record_points, record_residuals):
        if trace_every < 1:
            raise ValueError("trace_every must be >= 1")
        self.every = trace_every
        self.record_residuals = record_residuals
        self.values: list[float] = []
        self.residuals: list[float] = []
        self.points: list[np.ndarray] | None = [] if record_points else None
        self.tail: deque = deque(maxlen=TAIL)
        self.best_value = math.inf
        self.best_point = x1
        self.count = 0

    def see(self, x, fx, residual_fn):
        self.count += 1
        if fx < self.best_value:
            self.best_value = fx
            self.best_point = x
        self.tail.append(x)
        if (self.count - 1) % self.every == 0:
            self.values.append(fx)
            if self.record_residuals:
                self.residuals.append(residual_fn(x))
            if self.points is not None:
                self.points.append(x)

    def record(self, algorithm, x1, final, fx1, elapsed, reason, inner=0.0, message="", config=None):
        best_value, best_point = self.best_value, self.best_point
        if self.count == 0:
            best_value, best_point = fx1, x1
        return RunRecord(
            algorithm=algorithm,
            iterations=self.count,
            best_value=best_value,
            best_point=np.array(best_point),
            final_point=np.array(final),
            initial_point=np.array(x1),
            value_trace=self.values,
            residual_trace=self.residuals,
            wall_time=elapsed,
            stop_reason=reason,
            inner_time=inner,
            trace_every=self.every,
            point_trace=self.points,
            tail_points=list(self.tail),
            message=message,
            config=config or {},
        )


def fpqsm_run(
    oracle: QuasiSubgradientOracle,
    T: Operator,
    P_D: Operator,
    steps: StepSchedule,
    alphas: AlphaSchedule,
    x1,
    max_iter: int | None = None,
    time_budget: float | None = None,
    trace_every: int = 1,
    record_points: bool = False,
    record_residuals: bool = True,
    require_firm: bool = True,
) -> RunRecord:
    """Run the fixed-point quasiconvex subgradient method.

    The loop stops at ``max_iter`` updates, after ``time_budget`` seconds,
    or when the oracle reports a minimizer, whichever comes first.
    ``iterations`` counts the iterates examined: after a budget stop the
    final point ``x_{k+1}`` is returned but not evaluated; after an
    at-minimum stop the final point is the flagged iterate itself.
    """
    _check_budget(max_iter, time_budget)
    if require_firm and not T.firm:
        raise ValueError("T must be tagged firmly nonexpansive (wrap it with firm_up)")
    if P_D.dim != T.dim:
        raise ValueError("T and P_D dimensions differ")

    start = time.perf_counter()
    deadline = math.inf if time_budget is None else start + time_budget
    limit = math.inf if max_iter is None else max_iter
    Tf, Pf = T.fn, P_D.fn
    value, subgrad = oracle.value, oracle.unit_subgrad

    x = Pf(as_point(x1, T.dim))
    x_first = x
    trace = _Tracer(x, trace_every, record_points, record_residuals)
    residual = T.residual
    config = {"steps": str(steps), "alpha": alphas.value, "max_iter": max_iter, "time_budget": time_budget}

    reason, message = "max_iter", ""
    k = 0
    if limit == 0 or time_budget == 0:
        reason = "max_iter" if limit == 0 else "budget"
    else:
        while True:
            k += 1
            fx = value(x)
            if not math.isfinite(fx) or not np.all(np.isfinite(x)):
                reason, message = "nonfinite", f"non-finite value at iterate {k}"
                break
            trace.see(x, fx, residual)
            g, at_min = subgrad(x)
            if at_min:
                reason = "at_minimum"
                break
            v = steps(k)
            a = alphas(k)
            x = Pf(a * x + (1.0 - a) * Tf(x - v * g))
            if k >= limit:
                reason = "max_iter"
                break
            if time.perf_counter() >= deadline:
                reason = "budget"
                break

    elapsed = time.perf_counter() - start
    fx1 = value(x_first) if trace.count == 0 else trace.values[0]
    return trace.record("fpqsm", x_first, x, fx1, elapsed, reason, 0.0, message, config)


def qsm_run(
    oracle: QuasiSubgradientOracle,
    region: ConvexRegion | None,
    steps: StepSchedule,
    x1,
    max_iter: int | None = None,
    time_budget: float | None = None,
    residual_op: Operator | None = None,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    trace_every: int = 1,
    record_points: bool = False,
    record_residuals: bool = True,
) -> RunRecord:
    """Projection-based quasi-subgradient method.

    Each update projects ``x_k - v_k g_k`` onto ``region`` with Dykstra's
    method at tolerance ``v_k / 10`` (``region=None`` means the whole space).
    The inner solver shares the run's deadline; an update cut short by the
    deadline is discarded, so ``iterations`` counts completed updates only.

    The residual trace holds ``||x - residual_op(x)||`` when an operator is
    given, otherwise the iterate's largest constraint violation.
    """
    _check_budget(max_iter, time_budget)
    x = as_point(x1)
    if region is not None and region.dim != x.shape[0]:
        raise ValueError("region and x1 dimensions differ")

    start = time.perf_counter()
    deadline = None if time_budget is None else start + time_budget
    limit = math.inf if max_iter is None else max_iter
    value, subgrad = oracle.value, oracle.unit_subgrad
    if residual_op is not None:
        residual = residual_op.residual
    elif region is not None:
        residual = region.max_violation
    else:
        residual = lambda _x: 0.0  # noqa: E731

    x_first = x
    trace = _Tracer(x, trace_every, record_points, record_residuals)
    config = {"steps": str(steps), "max_iter": max_iter, "time_budget": time_budget, "max_sweeps": max_sweeps}
    inner = 0.0
    reason, message = "max_iter", ""
    k = 0
    if limit == 0 or time_budget == 0:
        reason = "max_iter" if limit == 0 else "budget"
    else:
        while True:
            k += 1
            fx = value(x)
            if not math.isfinite(fx) or not np.all(np.isfinite(x)):
                reason, message = "nonfinite", f"non-finite value at iterate {k}"
                break
            g, at_min = subgrad(x)
            if at_min:
                trace.see(x, fx, residual)
                reason = "at_minimum"
                break
            v = steps(k)
            z = x - v * g
            if region is None:
                x_next = z
            else:
                t0 = time.perf_counter()
                rep = dykstra_project(region, z, v / 10.0, max_sweeps, deadline)
                inner += time.perf_counter() - t0
                if rep.timed_out:
                    reason = "budget"
                    break
                if rep.infeasible:
                    reason = "infeasible"
                    message = f"inner projection stalled at violation {rep.max_violation:.3e} (iterate {k})"
                    break
                x_next = rep.point
            trace.see(x, fx, residual)
            x = x_next
            if k >= limit:
                reason = "max_iter"
                break
            if deadline is not None and time.perf_counter() >= deadline:
                reason = "budget"
                break

    elapsed = time.perf_counter() - start
    fx1 = value(x_first) if trace.count == 0 else trace.values[0]
    return trace.record("qsm", x_first, x, fx1, elapsed, reason, inner, message, config)


# ---------------------------------------------------------------------------
# Diagnostics: per-iteration inequality and rate bounds
# ---------------------------------------------------------------------------


def _iterates_with_successor(record: RunRecord) -> list[np.ndarray]:
    if record.point_trace is None or record.trace_every != 1:
        raise ValueError("diagnostics need a full point trace (record_points=True, trace_every=1)")
    pts = list(record.point_trace)
    if record.stop_reason in ("max_iter", "budget") and len(pts) == record.iterations:
        pts.append(record.final_point)
    return pts


def distance_decrease_check(
    record: RunRecord,
    diag: DiagnosticOracle,
    steps: StepSchedule,
    alphas: AlphaSchedule,
    slack: float = 1e-10,
) -> list[bool]:
    """Evaluate, for every iterate with ``f(x_k) > f_*``, the distance decrease

        ||x_{k+1} - x*||^2 <= ||x_k - x*||^2
                              - 2 v_k (1 - a_k) ((f(x_k) - f_*) / L)^(1/beta)
                              + (1 - a_k) v_k^2

    Iterates at the optimal value are skipped, so the list may be shorter
    than the trace.
    """
    pts = _iterates_with_successor(record)
    out = []
    for k in range(1, len(pts)):
        fx = record.value_trace[k - 1]
        if not fx > diag.f_star:
            continue
        v, a = steps(k), alphas(k)
        d_now = float(np.sum((pts[k - 1] - diag.x_star) ** 2))
        d_next = float(np.sum((pts[k] - diag.x_star) ** 2))
        rhs = d_now - 2.0 * v * (1.0 - a) * ((fx - diag.f_star) / diag.L) ** (1.0 / diag.beta) + (1.0 - a) * v * v
        out.append(d_next <= rhs + slack)
    return out


def rate_bound(diag: DiagnosticOracle, x1, c: float, alpha: float, k: int) -> float:
    """Upper bound on ``f(x*_k) - f_*`` for ``v_k = c/k`` and constant ``alpha``."""
    d1 = float(np.sum((as_point(x1) - diag.x_star) ** 2))
    inner = (d1 + 2.0 * c * c * (1.0 - alpha)) / (2.0 * c * (1.0 - alpha) * math.log(k + 1))
    return diag.L * inner ** diag.beta


def rate_bound_check(record: RunRecord, diag: DiagnosticOracle, c: float, alpha: float, slack: float = 1e-8) -> bool:
    """True iff the best value found by every recorded ``k`` obeys :func:`rate_bound`."""
    best = math.inf
    for j, fx in enumerate(record.value_trace):
        k = 1 + j * record.trace_every
        best = min(best, fx)
        if best - diag.f_star > rate_bound(diag, record.initial_point, c, alpha, k) + slack:
            return False
    return True


def constant_step_value_bound(diag: DiagnosticOracle, v: float) -> float:
    """Asymptotic value guarantee ``f_* + L (v/2)^beta`` for a constant step ``v``."""
    return diag.f_star + diag.L * (v / 2.0) ** diag.beta


def detect_oscillation(record: RunRecord, window: int = TAIL, rtol: float = 1e-12) -> bool:
    """True when the last ``window`` iterates bounce between two distinct points."""
    pts = record.tail_points[-window:]
    if len(pts) < max(window, 3) or record.stop_reason == "at_minimum":
        return False
    for j in range(2, len(pts)):
        scale = max(1.0, float(np.linalg.norm(pts[j])))
        if float(np.linalg.norm(pts[j] - pts[j - 2])) > rtol * scale:
            return False
        if float(np.linalg.norm(pts[j] - pts[j - 1])) <= 1e3 * rtol * scale:
            return False
    return True
