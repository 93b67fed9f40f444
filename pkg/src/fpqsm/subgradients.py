"""Unit quasi-subgradient oracles.

An element ``g`` of the quasi-subdifferential at ``x`` is any vector with
``<g, y - x> <= 0`` for every ``y`` in the strict sublevel set
``{y : f(y) < f(x)}``. The set is a cone, so normalizing a nonzero element
gives another element; every oracle here returns unit vectors.

When ``x`` minimizes ``f`` the strict sublevel set is empty and any vector
works. Oracles then return ``(e_1, True)`` and the solvers treat the flag
as a stopping signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .operators import as_point

if TYPE_CHECKING:
    from .problems import CobbDouglasInstance

__all__ = [
    "DomainError",
    "FractionalObjective",
    "QuasiSubgradientOracle",
    "ball_excess_oracle",
    "capped_norm_oracle",
    "capped_norm_subgradient",
    "cobb_douglas_oracle",
    "cobb_douglas_subgradient",
    "fractional_oracle",
    "fractional_subgradient",
    "norm_oracle",
    "normalize",
]

ZERO_TOL = 1e-14


class DomainError(ValueError):
    """Raised when a point lies outside an objective's declared domain."""


@dataclass(frozen=True)
class QuasiSubgradientOracle:
    """Objective value paired with a unit quasi-subgradient selector."""

    value: Callable[[np.ndarray], float]
    unit_subgrad: Callable[[np.ndarray], tuple[np.ndarray, bool]]
    name: str = "oracle"

    def __call__(self, x):
        return self.value(x)


def _basis(dim: int) -> np.ndarray:
    e = np.zeros(dim)
    e[0] = 1.0
    return e


def _unit(v: np.ndarray) -> np.ndarray:
    # divide by the largest entry first so huge or tiny vectors do not
    # overflow or underflow when squared
    s = float(np.max(np.abs(v)))
    w = v / s
    return w / float(np.linalg.norm(w))


def normalize(g_raw: np.ndarray, tol: float = ZERO_TOL) -> tuple[np.ndarray, bool]:
    """Scale ``g_raw`` to unit length; flag (and return ``e_1``) when it vanishes."""
    nrm = float(np.linalg.norm(g_raw))
    if not nrm >= tol:
        return _basis(g_raw.shape[0]), True
    return _unit(g_raw), False


# ---------------------------------------------------------------------------
# Fractional objectives a(x) / (<c, x> + c0)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FractionalObjective:
    """``f(x) = a(x) / (<c, x> + c0)`` with ``a`` convex and the denominator positive.

    ``grad_a`` must return some (sub)gradient of ``a``.
    """

    a: Callable[[np.ndarray], float]
    grad_a: Callable[[np.ndarray], np.ndarray]
    c: np.ndarray
    c0: float

    def __post_init__(self):
        object.__setattr__(self, "c", as_point(self.c))
        object.__setattr__(self, "c0", float(self.c0))

    def denominator(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.c0

    def value(self, x) -> float:
        x = as_point(x, self.c.shape[0])
        b = self.denominator(x)
        if not b > 0:
            raise DomainError(f"denominator must be positive, got {b}")
        return self.a(x) / b


def fractional_subgradient(obj: FractionalObjective, x) -> tuple[np.ndarray, bool]:
    """Normalized subgradient of ``a - f(x) b`` at ``x``, which lies in the
    quasi-subdifferential of ``f = a / b`` whenever ``b`` is affine."""
    x = as_point(x, obj.c.shape[0])
    fx = obj.value(x)
    g_raw = np.asarray(obj.grad_a(x), dtype=float) - fx * obj.c
    return normalize(g_raw)


def fractional_oracle(obj: FractionalObjective) -> QuasiSubgradientOracle:
    return QuasiSubgradientOracle(obj.value, lambda x: fractional_subgradient(obj, x), "fractional")


# ---------------------------------------------------------------------------
# Norm-type diagnostics
# ---------------------------------------------------------------------------


def capped_norm_subgradient(alpha: float, x) -> tuple[np.ndarray, bool]:
    """Subgradient of ``min(||x||, alpha)``: ``x / ||x||``, flagged at the origin."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    x = as_point(x)
    if not np.any(x):
        return _basis(x.shape[0]), True
    return _unit(x), False


def capped_norm_oracle(alpha: float) -> QuasiSubgradientOracle:
    def value(x):
        return min(float(np.linalg.norm(x)), alpha)

    return QuasiSubgradientOracle(value, lambda x: capped_norm_subgradient(alpha, x), "capped_norm")


def norm_oracle() -> QuasiSubgradientOracle:
    def value(x):
        return float(np.linalg.norm(x))

    def subgrad(x):
        x = as_point(x)
        if not np.any(x):
            return _basis(x.shape[0]), True
        return _unit(x), False

    return QuasiSubgradientOracle(value, subgrad, "norm")


def ball_excess_oracle(radius: float = 1.0) -> QuasiSubgradientOracle:
    """``max(||x|| - radius, 0)``; every point of the ball is a minimizer."""

    def value(x):
        return max(float(np.linalg.norm(x)) - radius, 0.0)

    def subgrad(x):
        x = as_point(x)
        nrm = float(np.linalg.norm(x))
        if nrm <= radius:
            return _basis(x.shape[0]), True
        return _unit(x), False

    return QuasiSubgradientOracle(value, subgrad, "ball_excess")


# ---------------------------------------------------------------------------
# Cobb-Douglas production efficiency
# ---------------------------------------------------------------------------


def cobb_douglas_subgradient(inst: "CobbDouglasInstance", x) -> tuple[np.ndarray, bool]:
    """Unit quasi-subgradient of the Cobb-Douglas efficiency objective.

    On the open orthant the fractional construction gives
    ``g_raw = a(x) * (a/x - c/b(x))`` with ``a(x) < 0``; dropping the
    positive factor ``-a(x)`` leaves ``c/b(x) - a/x``, which cannot
    underflow even when the product term does.

    Off the open orthant ``f(x) = 0`` and the strict sublevel set sits
    inside the open orthant, so ``-sum_{j : x_j <= 0} e_j`` separates it.
    """
    x = as_point(x, inst.n)
    nonpos = x <= 0.0
    if nonpos.any():
        g = -nonpos.astype(float)
        return g / math.sqrt(float(nonpos.sum())), False
    b = float(inst.c @ x) + inst.c0
    with np.errstate(over="ignore", divide="ignore"):
        g_raw = inst.c / b - inst.a / x
    if not np.all(np.isfinite(g_raw)):
        # subnormal coordinates: a/x overflows, so scale by min(x) > 0 first
        t = float(x.min())
        g_raw = inst.c * (t / b) - inst.a * (t / x)
    return normalize(g_raw)


def cobb_douglas_oracle(inst: "CobbDouglasInstance") -> QuasiSubgradientOracle:
    from .problems import cobb_douglas_value

    return QuasiSubgradientOracle(
        lambda x: cobb_douglas_value(inst, x),
        lambda x: cobb_douglas_subgradient(inst, x),
        "cobb_douglas",
    )
