"""Integration loop: history, startup, step assembly and bookkeeping."""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .controller import (
    ControllerConfig,
    IntegrationFailure,
    StepOutcome,
    StepSizeUnderflow,
    TooManyRejections,
    decide,
)
from .estimators import est1, est2
from .filters import filter_order2, filter_second
from .lin_space import as_state, linear_combine
from .stepper import Problem, SolverFailure, be_step, linearization_point

MODES = ("vsvo12", "constant_order1", "constant_order2", "constant_double")

# landing slack: a step that would stop within this fraction of T is stretched onto T
_LANDING_SLACK = 1e-2


class HistoryWindow:
    """The last few accepted (t, y) pairs, newest last."""

    def __init__(self, maxlen: int = 4):
        self.times = deque(maxlen=maxlen)
        self.states = deque(maxlen=maxlen)
        self.next_dt = None

    def __len__(self):
        return len(self.times)

    def push(self, t: float, y) -> None:
        if self.times and not t > self.times[-1]:
            raise ValueError(f"history times must increase ({t} after {self.times[-1]})")
        self.times.append(t)
        self.states.append(y)

    def back(self, k: int):
        """State ``k`` steps back (0 = newest), or None if not stored."""
        return self.states[-1 - k] if k < len(self.states) else None

    @property
    def t(self) -> float:
        return self.times[-1]

    def last_dt(self, k: int = 0) -> Optional[float]:
        if len(self.times) < k + 2:
            return None
        return self.times[-1 - k] - self.times[-2 - k]

    def r_cur(self, dt: float) -> Optional[float]:
        h = self.last_dt()
        return None if h is None else dt / h

    def r_prev(self) -> Optional[float]:
        h1, h0 = self.last_dt(0), self.last_dt(1)
        return None if h0 is None else h1 / h0


@dataclass
class TrajectoryRow:
    t: float
    y: Any
    order: int
    dt: float
    est1: float = math.nan
    est2: float = math.nan
    method: str = "be"


@dataclass
class Attempt:
    t: float
    dt: float
    accepted: bool
    order: int = 0
    est1: float = math.nan
    est2: float = math.nan
    reason: str = ""


@dataclass
class Trajectory:
    rows: list = field(default_factory=list)
    attempts: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.rows])

    @property
    def states(self) -> list:
        return [r.y for r in self.rows]

    @property
    def dts(self) -> np.ndarray:
        return np.array([r.dt for r in self.rows[1:]])

    @property
    def orders(self) -> np.ndarray:
        return np.array([r.order for r in self.rows[1:]])


@dataclass
class RunStatistics:
    accepted: int = 0
    rejected: int = 0
    accepted_by_order: dict = field(default_factory=lambda: {1: 0, 2: 0})
    solver_iterations: int = 0
    solver_failures: int = 0
    wall_time: float = 0.0

    @property
    def attempts(self) -> int:
        return self.accepted + self.rejected


class _Run:
    """Mutable state of one integration (never shared between runs)."""

    def __init__(self, problem, cfg, T):
        self.problem = problem
        self.cfg = cfg
        self.T = T
        self.traj = Trajectory()
        self.stats = RunStatistics()
        self.hist = HistoryWindow()
        self.rejects_in_row = 0

    def fail(self, exc_type, msg):
        return exc_type(msg, trajectory=self.traj, stats=self.stats)

    def accept(self, t, y, order, dt, e1=math.nan, e2=math.nan, method="be"):
        self.hist.push(t, y)
        self.traj.rows.append(TrajectoryRow(t, y, order, dt, e1, e2, method))
        self.traj.attempts.append(Attempt(t - dt, dt, True, order, e1, e2))
        self.stats.accepted += 1
        self.stats.accepted_by_order[min(order, 2)] += 1
        self.rejects_in_row = 0

    def reject(self, t, dt, e1=math.nan, e2=math.nan, reason="estimate"):
        self.traj.attempts.append(Attempt(t, dt, False, 0, e1, e2, reason))
        self.stats.rejected += 1
        self.rejects_in_row += 1

    def be(self, t, y, dt, linearization=None):
        y_new, report = be_step(self.problem, t, y, dt, linearization)
        self.stats.solver_iterations += report.iterations
        return y_new

    def landing(self, t, dt):
        """Stretch or shrink ``dt`` so the run ends exactly at T."""
        if t + dt * (1 + _LANDING_SLACK) >= self.T:
            return self.T - t, True
        return dt, False


def _solver_rejection(run: _Run, t, dt, exc):
    run.stats.solver_failures += 1
    run.reject(t, dt, reason="solver")
    if run.rejects_in_row > run.cfg.max_consecutive_rejects:
        raise run.fail(TooManyRejections, f"solver failed repeatedly near t={t:g}: {exc}")
    new_dt = 0.5 * dt
    if new_dt < run.cfg.dt_min:
        raise run.fail(StepSizeUnderflow, f"step size underflow after solver failure at t={t:g}")
    return new_dt


def startup(problem: Problem, y0, t0: float, cfg: ControllerConfig, dt0: float,
            T: float = math.inf, _run: Optional[_Run] = None) -> HistoryWindow:
    """Produce the first step by backward Euler with step-doubling control.

    One full step and two half steps are compared; the difference norm is
    treated as an order-1 estimate and the two-half-step value is kept.
    Returns the history window holding ``y0`` and ``y1``; the proposed next
    step is stored as ``history.next_dt``.
    """
    run = _run or _Run(problem, cfg, T)
    if not len(run.hist):
        run.hist.push(t0, y0)
    t, y, dt = run.hist.t, run.hist.back(0), dt0
    while True:
        dt, landed = run.landing(t, dt)
        try:
            y_full = run.be(t, y, dt)
            y_half = run.be(t, y, 0.5 * dt)
            y_two = run.be(t + 0.5 * dt, y_half, 0.5 * dt)
        except SolverFailure as exc:
            dt = _solver_rejection(run, t, dt, exc)
            continue
        e = problem.norm(linear_combine([1.0, -1.0], [y_full, y_two]))
        try:
            dec = decide(StepOutcome(y_two, y_two, e), cfg, dt, run.rejects_in_row)
        except IntegrationFailure as exc:
            raise run.fail(type(exc), str(exc)) from None
        if dec.accepted:
            t_new = run.T if landed else t + dt
            run.accept(t_new, y_two, 1, dt, e, method="startup")
            run.hist.next_dt = dec.next_dt
            return run.hist
        run.reject(t, dt, e)
        dt = dec.next_dt


def integrate(problem: Problem, y0, t0: float, T: float,
              cfg: Optional[ControllerConfig] = None, mode: str = "vsvo12",
              dt0: Optional[float] = None, start: str = "richardson"):
    """Integrate ``problem`` from ``t0`` to ``T``.

    Modes
    -----
    ``vsvo12``
        Adaptive step and order (1 or 2) with the embedded estimators.
    ``constant_order1``
        Plain backward Euler at fixed ``dt0``.
    ``constant_order2``
        Backward Euler plus the time filter at fixed ``dt0``.
    ``constant_double``
        As ``constant_order2`` with the second filter pass from the third
        step on.

    In the constant modes only the final step may differ from ``dt0``, so
    that the run ends exactly at ``T``. The second starting value of the
    two-step modes comes from ``start``: ``"richardson"`` combines one full
    and two half backward Euler steps (local error O(dt^3)), ``"be"`` is a
    plain backward Euler step.

    Returns
    -------
    (Trajectory, RunStatistics)

    Raises
    ------
    IntegrationFailure
        With ``.trajectory`` and ``.stats`` holding the partial run.
    """
    if start not in ("richardson", "be"):
        raise ValueError(f"unknown start {start!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if not T > t0:
        raise ValueError(f"need T > t0, got t0={t0}, T={T}")
    y0 = y0 if problem.implicit_solve is not None else as_state(y0)
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial state is not finite")
    if cfg is None:
        cfg = ControllerConfig.for_interval(t0, T, tol=1e-3)
    if dt0 is None:
        dt0 = 1e-4 * (T - t0)

    run = _Run(problem, cfg, T)
    run.traj.rows.append(TrajectoryRow(t0, y0, 0, math.nan, method="initial"))
    run.hist.push(t0, y0)
    wall0 = time.perf_counter()
    try:
        if mode == "vsvo12":
            _vsvo(run, dt0)
        else:
            _constant(run, dt0, mode, start)
    finally:
        run.stats.wall_time = time.perf_counter() - wall0
    return run.traj, run.stats


def _vsvo(run: _Run, dt0: float):
    problem, cfg, hist = run.problem, run.cfg, run.hist
    startup(problem, None, hist.t, cfg, dt0, run.T, _run=run)
    dt = hist.next_dt
    while hist.t < run.T:
        t = hist.t
        dt, landed = run.landing(t, dt)
        r = hist.r_cur(dt)
        y_n, y_nm1, y_nm2 = hist.back(0), hist.back(1), hist.back(2)
        lin = linearization_point(y_n, y_nm1, r) if problem.linearly_implicit else None
        try:
            y_be = run.be(t, y_n, dt, lin)
        except SolverFailure as exc:
            dt = _solver_rejection(run, t, dt, exc)
            continue
        y2 = filter_order2(y_be, y_n, y_nm1, r)
        e1 = est1(y_be, y2)
        e2 = est2(y2, y_n, y_nm1, y_nm2, r, hist.r_prev()) if y_nm2 is not None else None
        n1 = problem.norm(e1)
        n2 = None if e2 is None else problem.norm(e2)
        outcome = StepOutcome(y_be, y2, n1, n2, e1, e2)
        try:
            dec = decide(outcome, cfg, dt, run.rejects_in_row)
        except IntegrationFailure as exc:
            run.reject(t, dt, n1, math.nan if n2 is None else n2)
            raise run.fail(type(exc), f"{exc} (t={t:g})") from None
        if not dec.accepted:
            run.reject(t, dt, n1, math.nan if n2 is None else n2)
            dt = dec.next_dt
            continue
        state, order = dec.state, dec.order
        if e2 is None:
            # warmup: keep the filtered value under EST1 control
            state, order = y2, 2
        t_new = run.T if landed else t + dt
        run.accept(t_new, state, order, dt, n1, math.nan if n2 is None else n2,
                   method="be" if order == 1 else "filter")
        dt = dec.next_dt


def _constant(run: _Run, dt: float, mode: str, start: str):
    problem, hist = run.problem, run.hist
    t0 = hist.t
    n_steps = max(1, math.ceil((run.T - t0) / dt * (1 - 1e-12)))
    for k in range(1, n_steps + 1):
        t = hist.t
        t_new = run.T if k == n_steps else t0 + k * dt
        h = t_new - t
        y_n, y_nm1, y_nm2 = hist.back(0), hist.back(1), hist.back(2)
        r = hist.r_cur(h)
        lin = None
        if problem.linearly_implicit and y_nm1 is not None:
            lin = linearization_point(y_n, y_nm1, r)
        try:
            y_be = run.be(t, y_n, h, lin)
            if y_nm1 is None and mode != "constant_order1" and start == "richardson":
                y_half = run.be(t, y_n, 0.5 * h)
                y_two = run.be(t + 0.5 * h, y_half, 0.5 * h)
        except SolverFailure as exc:
            raise run.fail(IntegrationFailure, str(exc)) from None
        if mode == "constant_order1":
            run.accept(t_new, y_be, 1, h)
            continue
        if y_nm1 is None:
            if start == "richardson":
                run.accept(t_new, linear_combine([2.0, -1.0], [y_two, y_be]), 2, h,
                           method="richardson")
            else:
                run.accept(t_new, y_be, 1, h)
            continue
        y2 = filter_order2(y_be, y_n, y_nm1, r)
        e1 = est1(y_be, y2)
        n1 = problem.norm(e1)
        if y_nm2 is None:
            run.accept(t_new, y2, 2, h, n1, method="filter")
            continue
        rp = hist.r_prev()
        e2 = est2(y2, y_n, y_nm1, y_nm2, r, rp)
        n2 = problem.norm(e2)
        if mode == "constant_double":
            run.accept(t_new, filter_second(y2, y_n, y_nm1, y_nm2, r, rp), 2, h, n1, n2,
                       method="double")
        else:
            run.accept(t_new, y2, 2, h, n1, n2, method="filter")


def replay(problem: Problem, trajectory: Trajectory):
    """Recompute a trajectory from its recorded steps, methods and orders.

    Returns the list of recomputed states (including the initial one).
    """
    rows = trajectory.rows
    hist = HistoryWindow()
    hist.push(rows[0].t, rows[0].y)
    out = [rows[0].y]
    for row in rows[1:]:
        t, dt = hist.t, row.dt
        y_n, y_nm1, y_nm2 = hist.back(0), hist.back(1), hist.back(2)
        if row.method in ("startup", "richardson"):
            y_half, _ = be_step(problem, t, y_n, 0.5 * dt)
            y, _ = be_step(problem, t + 0.5 * dt, y_half, 0.5 * dt)
            if row.method == "richardson":
                y_full, _ = be_step(problem, t, y_n, dt)
                y = linear_combine([2.0, -1.0], [y, y_full])
        else:
            r = hist.r_cur(dt)
            lin = None
            if problem.linearly_implicit and y_nm1 is not None:
                lin = linearization_point(y_n, y_nm1, r)
            y, _ = be_step(problem, t, y_n, dt, lin)
            if row.method in ("filter", "double"):
                y2 = filter_order2(y, y_n, y_nm1, r)
                y = y2
                if row.method == "double":
                    y = filter_second(y2, y_n, y_nm1, y_nm2, r, hist.r_prev())
        hist.push(row.t, y)
        out.append(y)
    return out
