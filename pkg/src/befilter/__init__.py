"""Backward Euler plus time filters with variable step and order (1-2)."""

from .controller import (
    ControllerConfig,
    ControllerDecision,
    IntegrationFailure,
    StepOutcome,
    StepSizeUnderflow,
    TooManyRejections,
    decide,
    propose_dt,
)
from .driver import HistoryWindow, RunStatistics, Trajectory, integrate, replay, startup
from .estimators import ErrorEstimates, est1, est2
from .filters import filter_order2, filter_second, filter_weight, stencil_D, stencil_I
from .lin_space import inner, linear_combine, norm
from .stepper import Problem, SolverFailure, SolverReport, be_step, linearization_point, one_leg_step

__all__ = [
    "ControllerConfig", "ControllerDecision", "IntegrationFailure", "StepOutcome",
    "StepSizeUnderflow", "TooManyRejections", "decide", "propose_dt",
    "HistoryWindow", "RunStatistics", "Trajectory", "integrate", "replay", "startup",
    "ErrorEstimates", "est1", "est2",
    "filter_order2", "filter_second", "filter_weight", "stencil_D", "stencil_I",
    "inner", "linear_combine", "norm",
    "Problem", "SolverFailure", "SolverReport", "be_step", "linearization_point", "one_leg_step",
]
