"""Metric projection onto an intersection of half-spaces and a box.

This is the subproblem the projection-based baseline solves every
iteration. Dykstra's cyclic projections (with correction terms) converge
to the nearest point of the intersection, not just to some feasible point.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .operators import Box, HalfSpace, as_point, project_box, project_halfspace

__all__ = [
    "ConvexRegion",
    "ProjectionReport",
    "dykstra_project",
    "exact_project_special",
]

DEFAULT_MAX_SWEEPS = 100_000
# violation must shrink by this factor every STALL_WINDOW sweeps
STALL_WINDOW = 2_000
STALL_FACTOR = 0.99


@dataclass(frozen=True)
class ConvexRegion:
    halfspaces: tuple[HalfSpace, ...] = ()
    box: Box | None = None

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        if not hs and self.box is None:
            raise ValueError("a region needs at least one half-space or a box")
        dims = {h.dim for h in hs} | ({self.box.dim} if self.box is not None else set())
        if len(dims) != 1:
            raise ValueError("half-spaces and box must share one dimension")
        object.__setattr__(self, "halfspaces", hs)

    @property
    def dim(self) -> int:
        return self.halfspaces[0].dim if self.halfspaces else self.box.dim

    def max_violation(self, x: np.ndarray) -> float:
        v = max((h.violation(x) for h in self.halfspaces), default=0.0)
        if self.box is not None:
            v = max(v, self.box.violation(x))
        return v

    def to_dict(self) -> dict:
        d: dict = {"halfspaces": [h.to_dict() for h in self.halfspaces]}
        if self.box is not None:
            d["box"] = self.box.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConvexRegion":
        hs = [HalfSpace(h["b"], h["threshold"], h.get("sense", "upper")) for h in d.get("halfspaces", [])]
        box = Box.from_dict(d["box"]) if d.get("box") is not None else None
        return cls(tuple(hs), box)


@dataclass(frozen=True)
class ProjectionReport:
    point: np.ndarray
    iterations: int
    max_violation: float
    achieved_tol: float
    converged: bool = True
    infeasible: bool = False
    timed_out: bool = False
    violation_history: tuple[float, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "iterations": self.iterations,
            "max_violation": self.max_violation,
            "achieved_tol": self.achieved_tol,
            "converged": self.converged,
            "infeasible": self.infeasible,
            "timed_out": self.timed_out,
        }


def _violation_fn(region: ConvexRegion):
    """Vectorized equivalent of ``region.max_violation``."""
    hs = region.halfspaces
    if hs:
        sign = np.array([1.0 if h.sense == "upper" else -1.0 for h in hs])
        B = np.array([h.b for h in hs]) * sign[:, None]
        thr = np.array([h.threshold for h in hs]) * sign
    box = region.box

    def viol(x):
        v = float(np.max(B @ x - thr)) if hs else 0.0
        if box is not None:
            v = max(v, float(np.max(box.lower - x)), float(np.max(x - box.upper)))
        return max(v, 0.0)

    return viol


def dykstra_project(
    region: ConvexRegion,
    z,
    tol: float,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    deadline: float | None = None,
    record_history: bool = False,
) -> ProjectionReport:
    """Approximate the projection of ``z`` onto ``region``.

    Sets are visited in declaration order with the box last. A sweep ends
    the loop once the iterate moved by at most ``tol / 10``, no constraint
    is violated by more than ``tol / 10``, and the correction terms changed
    by at most ``tol / 10`` in total. The last test matters: the iterate can
    sit still at a feasible corner for a sweep while the corrections are
    still shifting, and it leaves that corner later.

    ``deadline`` is a ``time.perf_counter()`` value; reaching it returns the
    current iterate with ``timed_out`` set. A violation that stops shrinking
    while still above ``tol`` marks the region ``infeasible``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    z = as_point(z, region.dim)
    stop = tol / 10.0
    x = z.copy()
    viol = region.max_violation(x)
    if viol <= stop:
        return ProjectionReport(x, 0, viol, viol * 10.0, True, False, False, (viol,) if record_history else ())

    hs_data = [(h.b, h.threshold, h.sense == "lower", h.norm_sq) for h in region.halfspaces]
    box = region.box
    viol_of = _violation_fn(region)
    incr = [np.zeros_like(x) for _ in range(len(hs_data) + (box is not None))]
    history = [viol] if record_history else None
    marks = [viol]
    change = math.inf
    sweeps = 0
    converged = infeasible = timed_out = False
    while sweeps < max_sweeps:
        x_prev = x
        shift = 0.0
        for i, (b, thr, lower, nsq) in enumerate(hs_data):
            y = x + incr[i]
            s = float(b @ y)
            if (s < thr) if lower else (s > thr):
                x = y + ((thr - s) / nsq) * b
            else:
                x = y
            d = y - x
            shift += float(np.sum((d - incr[i]) ** 2))
            incr[i] = d
        if box is not None:
            y = x + incr[-1]
            x = np.minimum(np.maximum(y, box.lower), box.upper)
            d = y - x
            shift += float(np.sum((d - incr[-1]) ** 2))
            incr[-1] = d
        sweeps += 1
        change = float(np.linalg.norm(x - x_prev))
        viol = viol_of(x)
        if history is not None:
            history.append(viol)
        if change <= stop and viol <= stop and shift <= stop * stop:
            converged = True
            break
        if sweeps % STALL_WINDOW == 0:
            if viol > tol and viol > STALL_FACTOR * marks[-1]:
                infeasible = True
                break
            marks.append(viol)
        if deadline is not None and time.perf_counter() >= deadline:
            timed_out = True
            break

    achieved = 10.0 * max(change, viol)
    return ProjectionReport(
        x, sweeps, viol, achieved, converged, infeasible, timed_out,
        tuple(history) if history is not None else (),
    )


def _segment_nearest(p, a, b):
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return a
    t = min(max(float((p - a) @ d) / dd, 0.0), 1.0)
    return a + t * d


def _clip_polygon(verts: list[np.ndarray], hs: HalfSpace) -> list[np.ndarray]:
    """Sutherland-Hodgman clip of a convex polygon by one half-plane."""

    def signed(v):
        s = float(hs.b @ v)
        return hs.threshold - s if hs.sense == "upper" else s - hs.threshold

    out = []
    k = len(verts)
    for i in range(k):
        cur, nxt = verts[i], verts[(i + 1) % k]
        sc, sn = signed(cur), signed(nxt)
        if sc >= 0:
            out.append(cur)
        if (sc >= 0) != (sn >= 0):
            t = sc / (sc - sn)
            out.append(cur + t * (nxt - cur))
    return out


def exact_project_special(region: ConvexRegion, z) -> np.ndarray | None:
    """Closed-form projection for a single half-space, a lone box, or a
    bounded 2-D box cut by one half-plane; ``None`` otherwise."""
    z = as_point(z, region.dim)
    hs, box = region.halfspaces, region.box
    if box is None and len(hs) == 1:
        return project_halfspace(hs[0], z)
    if box is not None and not hs:
        return project_box(box, z)
    if box is not None and len(hs) == 1 and region.dim == 2 and box.is_bounded:
        if region.max_violation(z) == 0.0:
            return z.copy()
        lo, hi = box.lower, box.upper
        square = [np.array(v, dtype=float) for v in
                  ((lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1]))]
        poly = _clip_polygon(square, hs[0])
        if not poly:
            return None
        best, best_d = None, math.inf
        for i in range(len(poly)):
            q = _segment_nearest(z, poly[i], poly[(i + 1) % len(poly)])
            d = float(np.linalg.norm(z - q))
            if d < best_d:
                best, best_d = q, d
        return best
    return None
