"""Fixed-point quasiconvex subgradient method with a projection baseline
and a Cobb-Douglas benchmark harness."""

from .operators import (
    Ball,
    Box,
    HalfSpace,
    Operator,
    average,
    firm_up,
    gcfs_operator,
    identity,
    operator_from_dict,
    project_ball,
    project_box,
    project_halfspace,
)
from .projection import ConvexRegion, ProjectionReport, dykstra_project
from .solver import (
    AlphaSchedule,
    DiagnosticOracle,
    RunRecord,
    StepSchedule,
    fpqsm_run,
    fpqsm_step,
    qsm_run,
)
from .subgradients import QuasiSubgradientOracle

__version__ = "0.1.0"
