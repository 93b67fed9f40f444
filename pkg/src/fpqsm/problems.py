"""Benchmark problems: Cobb-Douglas production efficiency and diagnostics.

Random streams
--------------
Every experiment seed is expanded with ``numpy.random.SeedSequence(seed)``
and split with ``.spawn(2)``: child 0 drives instance generation, child 1
drives initial points. Both feed a ``PCG64`` bit generator, so any
implementation of PCG64 + SeedSequence reproduces the same instances from
the seed alone.

Instance draws happen in a fixed order: ``a0``, ``c0``, ``a~`` (n), ``c``
(n), the rows ``b_1..b_m`` (m x n), then lower thresholds (m) and, when the
case has them, upper thresholds (m). Half-open ranges of the form
``(0, s]`` are sampled as ``s * (1 - U)`` with ``U`` uniform on ``[0, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operators import (
    Box,
    HalfSpace,
    Operator,
    average,
    box_projector,
    firm_up,
    gcfs_operator,
    halfspace_projector,
    identity,
)
from .solver import DiagnosticOracle
from .subgradients import (
    QuasiSubgradientOracle,
    ball_excess_oracle,
    capped_norm_oracle,
    cobb_douglas_oracle,
    norm_oracle,
)

__all__ = [
    "CASES",
    "CobbDouglasInstance",
    "DiagnosticProblem",
    "build_constraint_operator",
    "build_gcfs_operator",
    "cobb_douglas_value",
    "constraint_halfspaces",
    "diagnostic_ball_excess_problem",
    "diagnostic_capped_problem",
    "diagnostic_norm_problem",
    "domain_box",
    "gen_bounded_case",
    "gen_case",
    "gen_gcfs_case",
    "gen_unbounded_case",
    "initial_points",
    "instance_operator",
    "streams",
]

CASES = ("unbounded", "bounded", "gcfs")


@dataclass(frozen=True, eq=False)
class CobbDouglasInstance:
    """Parameters of one Cobb-Douglas production efficiency problem.

    Constraint ``i`` reads ``p_lo[i] <= <b[i], x> <= p_hi[i]``; ``p_hi`` may
    hold ``inf``. The domain is ``[0, M]^n`` with ``M`` possibly ``inf``.
    """

    a0: float
    c0: float
    a: np.ndarray
    c: np.ndarray
    b: np.ndarray
    p_lo: np.ndarray
    p_hi: np.ndarray
    M: float = math.inf
    case: str = "custom"
    seed: int | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        c = np.asarray(self.c, dtype=float)
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        p_lo = np.asarray(self.p_lo, dtype=float).reshape(-1)
        p_hi = np.asarray(self.p_hi, dtype=float).reshape(-1)
        n = a.shape[0]
        if a.ndim != 1 or c.shape != (n,):
            raise ValueError("a and c must be vectors of the same length")
        if b.shape[1] != n or p_lo.shape != (b.shape[0],) or p_hi.shape != (b.shape[0],):
            raise ValueError("constraint arrays have inconsistent shapes")
        if not (self.a0 > 0 and self.c0 > 0):
            raise ValueError("a0 and c0 must be positive")
        if np.any(a <= 0) or abs(math.fsum(a) - 1.0) > 1e-12:
            raise ValueError("a must be positive and sum to 1")
        if np.any(c <= 0):
            raise ValueError("c must be positive")
        if np.any(np.einsum("ij,ij->i", b, b) <= 0):
            raise ValueError("every constraint normal b_i must be nonzero")
        if not self.M > 0:
            raise ValueError("M must be positive")
        for arr in (a, c, b, p_lo, p_hi):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "p_lo", p_lo)
        object.__setattr__(self, "p_hi", p_hi)
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "M", float(self.M))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[0]

    def to_dict(self) -> dict:
        def enc(v):
            return None if math.isinf(v) else float(v)

        return {
            "case": self.case,
            "seed": self.seed,
            "n": self.n,
            "m": self.m,
            "a0": self.a0,
            "c0": self.c0,
            "a": self.a.tolist(),
            "c": self.c.tolist(),
            "b": self.b.tolist(),
            "p_lo": self.p_lo.tolist(),
            "p_hi": [enc(v) for v in self.p_hi],
            "M": enc(self.M),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CobbDouglasInstance":
        if "a" not in d and "case" in d:
            # generator reference instead of explicit parameters
            return gen_case(d["case"], int(d["n"]), int(d["m"]), int(d.get("seed", 0)))
        p_hi = [math.inf if v is None else v for v in d["p_hi"]]
        M = math.inf if d.get("M") is None else d["M"]
        return cls(
            d["a0"], d["c0"], d["a"], d["c"], d["b"], d["p_lo"], p_hi, M,
            d.get("case", "custom"), d.get("seed"),
        )


def cobb_douglas_value(inst: CobbDouglasInstance, x) -> float:
    """``-a0 prod x_j^a_j / (<c, x> + c0)`` on the closed orthant, 0 elsewhere."""
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"dimension mismatch: expected {inst.n}, got {x.shape}")
    if np.any(x <= 0.0):
        return 0.0
    log_prod = float(inst.a @ np.log(x))
    return -inst.a0 * math.exp(log_prod) / (float(inst.c @ x) + inst.c0)


def domain_box(inst: CobbDouglasInstance) -> Box:
    return Box.cube(inst.n, 0.0, inst.M)


def constraint_halfspaces(inst: CobbDouglasInstance) -> list[HalfSpace]:
    """The finite half-spaces of all constraints, lower before upper per index."""
    out = []
    for bi, lo, hi in zip(inst.b, inst.p_lo, inst.p_hi):
        out.append(HalfSpace(bi, lo, "lower"))
        if math.isfinite(hi):
            out.append(HalfSpace(bi, hi, "upper"))
    return out


def _halfspace_pair(bi, lo, hi) -> list[Operator]:
    lower = halfspace_projector(HalfSpace(bi, lo, "lower"))
    if math.isfinite(hi):
        upper = halfspace_projector(HalfSpace(bi, hi, "upper"))
    else:
        upper = identity(bi.shape[0])
    return [lower, upper]


def build_constraint_operator(inst: CobbDouglasInstance) -> Operator:
    """``T = (Id + T~) / 2`` with ``T~`` the mean over constraints of the
    averaged lower/upper half-space projections."""
    pairs = [average(_halfspace_pair(bi, lo, hi)) for bi, lo, hi in zip(inst.b, inst.p_lo, inst.p_hi)]
    return firm_up(average(pairs), 0.5)


def build_gcfs_operator(inst: CobbDouglasInstance) -> Operator:
    """Firmly nonexpansive map whose fixed points minimize the mean squared
    distance to the 2m constraint half-spaces over the domain box.

    Uniform weights ``1/(2m)``; an infinite upper threshold contributes the
    identity (distance zero to the whole space).
    """
    members = []
    for bi, lo, hi in zip(inst.b, inst.p_lo, inst.p_hi):
        members.extend(_halfspace_pair(bi, lo, hi))
    w = 1.0 / len(members)
    T = gcfs_operator(box_projector(domain_box(inst)), [(op, w) for op in members])
    return firm_up(T, 0.5)


def instance_operator(inst: CobbDouglasInstance) -> Operator:
    """The operator the fixed-point method receives for this instance's case."""
    if inst.case == "gcfs":
        return build_gcfs_operator(inst)
    return build_constraint_operator(inst)


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(instance stream, initial-point stream) for an experiment seed."""
    inst_ss, init_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.PCG64(inst_ss)), np.random.Generator(np.random.PCG64(init_ss))


def _open_left(rng: np.random.Generator, scale: float, size=None):
    return scale * (1.0 - rng.random(size))


def _common(rng: np.random.Generator, n: int, m: int):
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    a0 = float(_open_left(rng, 10.0))
    c0 = float(_open_left(rng, 10.0))
    a_tilde = _open_left(rng, 1.0, n)
    c = _open_left(rng, 10.0, n)
    b = rng.random((m, n))
    for i in range(m):
        # a zero row has probability zero; redraw to keep the normal valid
        while not np.any(b[i] > 0):
            b[i] = rng.random(n)
    return a0, c0, a_tilde / a_tilde.sum(), c, b


def gen_unbounded_case(n: int, m: int, seed: int) -> CobbDouglasInstance:
    rng, _ = streams(seed)
    a0, c0, a, c, b = _common(rng, n, m)
    bn = np.linalg.norm(b, axis=1)
    p_lo = 25.0 * bn * rng.random(m)
    return CobbDouglasInstance(a0, c0, a, c, b, p_lo, np.full(m, math.inf), math.inf, "unbounded", seed)


def gen_bounded_case(n: int, m: int, seed: int) -> CobbDouglasInstance:
    rng, _ = streams(seed)
    a0, c0, a, c, b = _common(rng, n, m)
    bn = np.linalg.norm(b, axis=1)
    p_lo = 25.0 * bn * rng.random(m)
    p_hi = 100.0 * bn - 25.0 * bn * rng.random(m)
    return CobbDouglasInstance(a0, c0, a, c, b, p_lo, p_hi, 100.0, "bounded", seed)


def gen_gcfs_case(n: int, m: int, seed: int) -> CobbDouglasInstance:
    """Thresholds drawn independently from ``[0, 100||b_i||)``; at least one
    constraint is guaranteed to be self-contradictory (``p_hi < p_lo``)."""
    rng, _ = streams(seed)
    a0, c0, a, c, b = _common(rng, n, m)
    bn = np.linalg.norm(b, axis=1)
    p_lo = 100.0 * bn * rng.random(m)
    p_hi = 100.0 * bn * rng.random(m)
    if not np.any(p_hi < p_lo):
        if p_lo[0] < p_hi[0]:
            p_lo[0], p_hi[0] = p_hi[0], p_lo[0]
        elif p_lo[0] > 0.0:
            p_hi[0] = 0.5 * p_lo[0]
        else:
            p_lo[0] = 50.0 * bn[0]
    return CobbDouglasInstance(a0, c0, a, c, b, p_lo, p_hi, math.inf, "gcfs", seed)


def gen_case(case: str, n: int, m: int, seed: int) -> CobbDouglasInstance:
    gens = {"unbounded": gen_unbounded_case, "bounded": gen_bounded_case, "gcfs": gen_gcfs_case}
    try:
        gen = gens[case]
    except KeyError:
        raise ValueError(f"unknown case {case!r}; expected one of {CASES}") from None
    return gen(n, m, seed)


def initial_points(inst: CobbDouglasInstance, count: int, seed: int) -> list[np.ndarray]:
    """``count`` starting points uniform on ``[0, min(M, 100)]^n``."""
    _, rng = streams(seed)
    hi = min(inst.M, 100.0)
    return [hi * rng.random(inst.n) for _ in range(count)]


# ---------------------------------------------------------------------------
# Diagnostic problems with known solution data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticProblem:
    name: str
    dim: int
    oracle: QuasiSubgradientOracle
    diag: DiagnosticOracle
    T: Operator
    P_D: Operator = field(default=None)

    def __post_init__(self):
        if self.P_D is None:
            object.__setattr__(self, "P_D", identity(self.dim))

    def f(self, x) -> float:
        return self.oracle.value(np.asarray(x, dtype=float))


def diagnostic_norm_problem(dim: int = 2) -> DiagnosticProblem:
    """``f(x) = ||x||``: convex, Lipschitz with L = 1, minimizer 0."""
    diag = DiagnosticOracle(f_star=0.0, x_star=np.zeros(dim), L=1.0, beta=1.0)
    return DiagnosticProblem("norm", dim, norm_oracle(), diag, identity(dim))


def diagnostic_capped_problem(alpha: float = 1.0, dim: int = 1) -> DiagnosticProblem:
    """``f(x) = min(||x||, alpha)``, quasiconvex but not convex."""
    diag = DiagnosticOracle(f_star=0.0, x_star=np.zeros(dim), L=1.0, beta=1.0)
    return DiagnosticProblem("capped", dim, capped_norm_oracle(alpha), diag, identity(dim))


def diagnostic_ball_excess_problem(radius: float = 1.0, dim: int = 2) -> DiagnosticProblem:
    """``f(x) = max(||x|| - radius, 0)``: the solution set is a whole ball."""
    diag = DiagnosticOracle(f_star=0.0, x_star=np.zeros(dim), L=1.0, beta=1.0)
    return DiagnosticProblem("ball_excess", dim, ball_excess_oracle(radius), diag, identity(dim))
