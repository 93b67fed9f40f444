"""Nonexpansive mappings on R^n and the rules for combining them.

Points are plain 1-D float arrays. Every constructor returns an
:class:`Operator`: an immutable node that knows how to evaluate itself,
whether it is firmly nonexpansive, and how to describe itself as JSON so
constraint sets can be declared in config files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

__all__ = [
    "Ball",
    "Box",
    "HalfSpace",
    "Operator",
    "as_point",
    "average",
    "ball_projector",
    "box_projector",
    "firm_up",
    "gcfs_operator",
    "halfspace_projector",
    "identity",
    "operator_from_dict",
    "project_ball",
    "project_box",
    "project_halfspace",
]

NONEXPANSIVE = "nonexpansive"
FIRMLY_NONEXPANSIVE = "firmly-nonexpansive"


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float array, checking ``dim`` if given."""
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1:
        raise ValueError(f"a point must be 1-D, got shape {p.shape}")
    if dim is not None and p.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {p.shape[0]}")
    return p


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


# ---------------------------------------------------------------------------
# Sets with closed-form projections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HalfSpace:
    """``{x : threshold <= <b, x>}`` (sense "lower") or ``{x : <b, x> <= threshold}``."""

    b: np.ndarray
    threshold: float
    sense: str = "upper"

    def __post_init__(self):
        b = as_point(self.b)
        if self.sense not in ("lower", "upper"):
            raise ValueError(f"sense must be 'lower' or 'upper', got {self.sense!r}")
        norm_sq = float(b @ b)
        if not norm_sq > 0.0:
            raise ValueError("half-space normal must be nonzero")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "threshold", float(self.threshold))
        object.__setattr__(self, "_norm_sq", norm_sq)

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    @property
    def norm_sq(self) -> float:
        return self._norm_sq

    def violation(self, x: np.ndarray) -> float:
        """Amount by which ``x`` violates the constraint (0 when feasible)."""
        s = float(self.b @ x)
        if self.sense == "lower":
            return max(self.threshold - s, 0.0)
        return max(s - self.threshold, 0.0)

    def to_dict(self) -> dict:
        return {"b": self.b.tolist(), "threshold": self.threshold, "sense": self.sense}


def _bound_array(v, dim: int | None, fill: float) -> np.ndarray:
    if v is None:
        if dim is None:
            raise ValueError("cannot infer box dimension")
        return np.full(dim, fill)
    arr = np.array([fill if e is None else e for e in np.atleast_1d(v)], dtype=float)
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; infinite bounds are allowed on either side."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-D arrays of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("box bounds must not be NaN")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, dim: int, lower: float = 0.0, upper: float = math.inf) -> "Box":
        return cls(np.full(dim, float(lower)), np.full(dim, float(upper)))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def violation(self, x: np.ndarray) -> float:
        below = np.max(self.lower - x, initial=0.0)
        above = np.max(x - self.upper, initial=0.0)
        return float(max(below, above, 0.0))

    def to_dict(self) -> dict:
        def enc(a):
            return [None if not math.isfinite(v) else float(v) for v in a]

        return {"lower": enc(self.lower), "upper": enc(self.upper)}

    @classmethod
    def from_dict(cls, d: dict) -> "Box":
        lo = _bound_array(d["lower"], None, -math.inf)
        hi = _bound_array(d["upper"], None, math.inf)
        return cls(lo, hi)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = as_point(self.center)
        if not self.radius >= 0:
            raise ValueError("ball radius must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "radius": self.radius}


def project_halfspace(hs: HalfSpace, x) -> np.ndarray:
    """Metric projection onto a closed half-space.

    Points already inside are returned unchanged (as a copy); otherwise
    ``x + (p - <b, x>) / ||b||^2 * b``.
    """
    x = as_point(x)
    _check_dims(hs.b, x)
    s = float(hs.b @ x)
    if hs.sense == "lower":
        if hs.threshold <= s:
            return x.copy()
    elif s <= hs.threshold:
        return x.copy()
    return x + ((hs.threshold - s) / hs.norm_sq) * hs.b


def project_box(box: Box, x) -> np.ndarray:
    x = as_point(x)
    _check_dims(box.lower, x)
    return np.minimum(np.maximum(x, box.lower), box.upper)


def project_ball(ball: Ball, x) -> np.ndarray:
    x = as_point(x)
    _check_dims(ball.center, x)
    d = x - ball.center
    r = math.sqrt(float(d @ d))
    if r <= ball.radius:
        return x.copy()
    return ball.center + (ball.radius / r) * d


# ---------------------------------------------------------------------------
# Operator nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Operator:
    """An evaluable map R^dim -> R^dim tagged (firmly) nonexpansive.

    ``kind``/``params``/``children`` describe how the node was built; they
    drive JSON serialization and are never consulted during evaluation.
    """

    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    dim: int
    tag: str = NONEXPANSIVE
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    children: tuple = ()

    def __post_init__(self):
        if self.tag not in (NONEXPANSIVE, FIRMLY_NONEXPANSIVE):
            raise ValueError(f"unknown operator tag {self.tag!r}")
        if self.dim < 1:
            raise ValueError("operator dimension must be positive")

    def __call__(self, x) -> np.ndarray:
        return self.fn(as_point(x, self.dim))

    @property
    def firm(self) -> bool:
        return self.tag == FIRMLY_NONEXPANSIVE

    def residual(self, x) -> float:
        """Fixed-point residual ``||x - T(x)||``."""
        x = as_point(x, self.dim)
        return float(np.linalg.norm(x - self.fn(x)))

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise TypeError("custom operators cannot be serialized")
        d: dict[str, Any] = {"kind": self.kind, "dim": self.dim}
        d.update(self.params)
        if self.kind == "gcfs":
            outer, *members = self.children
            d["outer"] = outer.to_dict()
            d["members"] = [
                {"weight": w, "op": m.to_dict()}
                for w, m in zip(self.params["weights"], members)
            ]
            del d["weights"]
        elif self.children:
            d["children"] = [c.to_dict() for c in self.children]
        return d


def identity(dim: int) -> Operator:
    return Operator(lambda x: x.copy(), dim, FIRMLY_NONEXPANSIVE, "identity")


def halfspace_projector(hs: HalfSpace) -> Operator:
    return Operator(
        lambda x: project_halfspace(hs, x),
        hs.dim,
        FIRMLY_NONEXPANSIVE,
        "halfspace",
        {"set": hs.to_dict()},
    )


def box_projector(box: Box) -> Operator:
    lo, hi = box.lower, box.upper
    return Operator(
        lambda x: np.minimum(np.maximum(x, lo), hi),
        box.dim,
        FIRMLY_NONEXPANSIVE,
        "box",
        {"set": box.to_dict()},
    )


def ball_projector(ball: Ball) -> Operator:
    return Operator(
        lambda x: project_ball(ball, x),
        ball.dim,
        FIRMLY_NONEXPANSIVE,
        "ball",
        {"set": ball.to_dict()},
    )


def _affine_leaves(op: Operator, weight: float, out: list) -> bool:
    """Flatten nested averages into weighted half-space/identity leaves.

    Returns False when the tree contains anything else.
    """
    if op.kind == "identity":
        out.append((None, weight))
        return True
    if op.kind == "halfspace":
        out.append((HalfSpace(**op.params["set"]), weight))
        return True
    if op.kind == "average":
        share = weight / len(op.children)
        return all(_affine_leaves(c, share, out) for c in op.children)
    return False


def _stacked_halfspace_map(leaves: list) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized ``x -> w_id x + sum_i w_i P_i(x)`` for half-space leaves."""
    w_id = sum(w for hs, w in leaves if hs is None)
    hss = [(hs, w) for hs, w in leaves if hs is not None]
    if not hss:
        return lambda x: w_id * x
    B = np.array([hs.b for hs, _ in hss])
    p = np.array([hs.threshold for hs, _ in hss])
    # +1 for lower (p <= <b,x>), -1 for upper, so violation = max(sign*(p - Bx), 0)
    sign = np.array([1.0 if hs.sense == "lower" else -1.0 for hs, _ in hss])
    w = np.array([wt for _, wt in hss])
    w_hs = float(w.sum())
    coef = sign * w / np.einsum("ij,ij->i", B, B)
    w_total = w_id + w_hs

    def fn(x):
        viol = np.maximum(sign * (p - B @ x), 0.0)
        return w_total * x + (coef * viol) @ B

    return fn


def average(ops: Sequence[Operator]) -> Operator:
    """Arithmetic mean of nonexpansive maps.

    The caller is responsible for the fixed-point sets having a common
    point; the mean's fixed-point set is then their intersection.
    """
    ops = tuple(ops)
    if not ops:
        raise ValueError("average needs at least one operator")
    dim = ops[0].dim
    if any(o.dim != dim for o in ops):
        raise ValueError("all operators must share one dimension")

    leaves: list = []
    if len(ops) > 1 and all(_affine_leaves(o, 1.0 / len(ops), leaves) for o in ops):
        fn = _stacked_halfspace_map(leaves)
    else:
        fns = [o.fn for o in ops]
        scale = 1.0 / len(fns)

        def fn(x):
            acc = fns[0](x)
            for f in fns[1:]:
                acc = acc + f(x)
            return acc * scale

    return Operator(fn, dim, NONEXPANSIVE, "average", {}, ops)


def firm_up(op: Operator, alpha: float = 0.5) -> Operator:
    """``x -> alpha x + (1 - alpha) op(x)``, firmly nonexpansive for alpha in (0, 1/2]."""
    if not 0.0 < alpha <= 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2], got {alpha}")
    inner = op.fn
    beta = 1.0 - alpha

    def fn(x):
        return alpha * x + beta * inner(x)

    return Operator(fn, op.dim, FIRMLY_NONEXPANSIVE, "firm_up", {"alpha": alpha}, (op,))


def gcfs_operator(outer: Operator, members: Sequence[tuple[Operator, float]]) -> Operator:
    """``x -> P_X0(sum_i w_i P_Xi(x))``.

    Its fixed points minimize the weighted mean squared distance to the
    member sets over ``X0`` (one projected-gradient step of unit length).
    """
    members = list(members)
    if not members:
        raise ValueError("gcfs_operator needs at least one member set")
    weights = [float(w) for _, w in members]
    if any(not w > 0 for w in weights):
        raise ValueError("gcfs weights must be positive")
    if abs(math.fsum(weights) - 1.0) > 1e-12:
        raise ValueError(f"gcfs weights must sum to 1, got {math.fsum(weights)!r}")
    dim = outer.dim
    if any(op.dim != dim for op, _ in members):
        raise ValueError("all operators must share one dimension")

    leaves: list = []
    if all(_affine_leaves(op, w, leaves) for op, w in members):
        mix = _stacked_halfspace_map(leaves)
    else:
        pairs = [(op.fn, w) for op, w in members]

        def mix(x):
            acc = pairs[0][1] * pairs[0][0](x)
            for f, w in pairs[1:]:
                acc = acc + w * f(x)
            return acc

    proj = outer.fn

    def fn(x):
        return proj(mix(x))

    children = (outer,) + tuple(op for op, _ in members)
    return Operator(fn, dim, NONEXPANSIVE, "gcfs", {"weights": weights}, children)


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------


def operator_from_dict(d: dict) -> Operator:
    """Rebuild an operator tree from :meth:`Operator.to_dict` output."""
    kind = d.get("kind")
    if kind == "identity":
        return identity(int(d["dim"]))
    if kind == "halfspace":
        s = d["set"]
        return halfspace_projector(HalfSpace(s["b"], s["threshold"], s.get("sense", "upper")))
    if kind == "box":
        return box_projector(Box.from_dict(d["set"]))
    if kind == "ball":
        s = d["set"]
        return ball_projector(Ball(s["center"], s["radius"]))
    if kind == "average":
        return average([operator_from_dict(c) for c in d["children"]])
    if kind == "firm_up":
        (child,) = d["children"]
        return firm_up(operator_from_dict(child), d["alpha"])
    if kind == "gcfs":
        members = [(operator_from_dict(m["op"]), m["weight"]) for m in d["members"]]
        return gcfs_operator(operator_from_dict(d["outer"]), members)
    raise ValueError(f"unknown operator kind {kind!r}")
