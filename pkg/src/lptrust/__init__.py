"""Smoothed proximal trust-region methods for L^p-regularized PDE-constrained control."""

from .baselines import MmParams, PgParams, mm_solve, pg_solve
from .discretization import BoxBounds, Grid, GridFunction, Space
from .pde_problems import ProblemSpec, builtin_specs, make_spec
from .regularizer import RegularizerParams
from .report import ReportRow, emit_report, parse_report
from .schedule import EpsSchedule, FactorialSchedule, GeometricSchedule
from .tr_driver import TRConfig, solve

__all__ = [
    "BoxBounds", "EpsSchedule", "FactorialSchedule", "GeometricSchedule", "Grid",
    "GridFunction", "MmParams", "PgParams", "ProblemSpec", "RegularizerParams", "ReportRow",
    "Space", "TRConfig", "builtin_specs", "emit_report", "make_spec", "mm_solve",
    "parse_report", "pg_solve", "solve",
]
