"""Backward Euler substep, linearization point and the one-leg twin.

A :class:`Problem` either brings its own implicit solver (the spectral
testbed does) or relies on the damped Newton iteration below with an
analytic or finite-difference Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lin_space import as_state, linear_combine, norm as rms_norm

SOLVER_TOL = 1e-12
MAX_ITER = 50
_EPS = np.finfo(float).eps


@dataclass
class SolverReport:
    iterations: int = 0
    final_residual: float = 0.0
    converged: bool = True


class SolverFailure(RuntimeError):
    """Nonlinear solve did not converge. The driver treats it as a rejection."""

    def __init__(self, message, report: Optional[SolverReport] = None):
        super().__init__(message)
        self.report = report


@dataclass
class Problem:
    """An initial value problem ``y' = rhs(t, y)``.

    Parameters
    ----------
    rhs
        Right-hand side ``f(t, y)``.
    jac
        Optional Jacobian ``df/dy(t, y)`` as a dense matrix. Finite
        differences are used when absent.
    implicit_solve
        Optional ``(t_new, y_prev, dt, linearization) -> (y, SolverReport)``
        replacing the built-in Newton iteration.
    norm
        Norm used by the controller. RMS by default.
    linearly_implicit
        Linearize about an extrapolated state instead of iterating to
        convergence.
    exact
        Optional exact solution ``y(t)``, used by the experiments only.
    """

    rhs: Callable
    jac: Optional[Callable] = None
    implicit_solve: Optional[Callable] = None
    norm: Callable = rms_norm
    linearly_implicit: bool = False
    solver_tol: float = SOLVER_TOL
    max_iter: int = MAX_ITER
    exact: Optional[Callable] = None
    name: str = ""
    meta: dict = field(default_factory=dict)


def fd_jacobian(fun, t, y, f0=None):
    y = np.asarray(y, dtype=float)
    if f0 is None:
        f0 = np.asarray(fun(t, y), dtype=float)
    n = y.size
    J = np.empty((f0.size, n))
    for j in range(n):
        h = np.sqrt(_EPS) * max(1.0, abs(y.flat[j]))
        yp = y.copy()
        yp.flat[j] += h
        J[:, j] = (np.asarray(fun(t, yp), dtype=float) - f0).ravel() / h
    return J


def _jacobian(problem, t, y, f0=None):
    if problem.jac is not None:
        return np.atleast_2d(np.asarray(problem.jac(t, y), dtype=float))
    return fd_jacobian(problem.rhs, t, y, f0)


def newton(residual, jacobian, x0, tol=SOLVER_TOL, max_iter=MAX_ITER, norm=rms_norm):
    """Damped Newton iteration for ``residual(x) = 0``.

    Convergence is declared when the RMS residual drops below ``tol`` or
    below a rounding floor proportional to the size of ``x`` (an absolute
    1e-12 is unreachable for large states). At least one update is made
    unless the initial residual is exactly zero.
    """
    x = np.array(x0, dtype=float)
    r = residual(x)
    rn = norm(r)
    it = 0
    while True:
        floor = 16 * _EPS * max(1.0, norm(x))
        # at least one update, so a tiny state is not accepted on the absolute test alone
        if rn == 0 or (it > 0 and rn <= max(tol, floor)):
            return x, SolverReport(it, rn, True)
        if it >= max_iter:
            return x, SolverReport(it, rn, False)
        J = jacobian(x)
        try:
            dx = np.linalg.solve(J, -r.ravel()).reshape(x.shape)
        except np.linalg.LinAlgError:
            return x, SolverReport(it, rn, False)
        lam = 1.0
        for _ in range(12):
            x_try = x + lam * dx
            r_try = residual(x_try)
            rn_try = norm(r_try)
            if np.isfinite(rn_try) and rn_try < rn or rn_try <= floor:
                break
            lam *= 0.5
        x, r, rn = x_try, r_try, rn_try
        it += 1


def be_step(problem: Problem, t_n: float, y_n, dt: float, linearization=None):
    """One backward Euler step ``(y - y_n)/dt = f(t_n + dt, y)``.

    Returns ``(y, SolverReport)``. With ``problem.linearly_implicit`` the
    right-hand side is linearized about ``linearization`` (``y_n`` if not
    given) and a single linear solve is made.

    Raises
    ------
    SolverFailure
        If the nonlinear iteration does not converge.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    t_new = t_n + dt
    if problem.implicit_solve is not None:
        y, report = problem.implicit_solve(t_new, y_n, dt, linearization)
    elif problem.linearly_implicit:
        y, report = _linearized_be(problem, t_new, as_state(y_n), dt,
                                   y_n if linearization is None else linearization)
    else:
        y_n = as_state(y_n)
        f = problem.rhs

        def residual(y):
            return y - y_n - dt * np.asarray(f(t_new, y), dtype=float)

        def jacobian(y):
            return np.eye(y.size) - dt * _jacobian(problem, t_new, y)

        y, report = newton(residual, jacobian, y_n, problem.solver_tol, problem.max_iter,
                           problem.norm)
    if not report.converged:
        raise SolverFailure(
            f"backward Euler solve did not converge at t={t_new:g} "
            f"(residual {report.final_residual:.3e} after {report.iterations} iterations)",
            report,
        )
    return y, report


def _linearized_be(problem, t_new, y_n, dt, u_star):
    u_star = as_state(u_star)
    f0 = np.asarray(problem.rhs(t_new, u_star), dtype=float)
    J = _jacobian(problem, t_new, u_star, f0)
    A = np.eye(y_n.size) - dt * J
    b = y_n + dt * (f0 - J @ u_star)
    y = np.linalg.solve(A, b)
    res = problem.norm(A @ y - b)
    return y, SolverReport(1, res, True)


def linearization_point(y_n, y_nm1, r_cur: float):
    """Extrapolated state ``(1 + r) y_n - r y_nm1`` for linearly implicit steps."""
    if r_cur < 0:
        raise ValueError(f"step ratio must be nonnegative, got {r_cur}")
    return linear_combine([1.0 + r_cur, -r_cur], [y_n, y_nm1])


def one_leg_step(problem: Problem, t_n: float, y_n, y_nm1, dt: float):
    """Constant-step one-leg form of backward Euler plus the 1/3 filter.

    Solves ``(3/2 y - 2 y_n + 1/2 y_nm1) / dt = f(t_n + dt, 3/2 y - y_n + 1/2 y_nm1)``
    directly for ``y``. Used to cross-check the two-stage implementation.
    """
    y_n, y_nm1 = as_state(y_n), as_state(y_nm1)
    t_new = t_n + dt
    f = problem.rhs

    def residual(y):
        w = 1.5 * y - y_n + 0.5 * y_nm1
        return (1.5 * y - 2.0 * y_n + 0.5 * y_nm1) - dt * np.asarray(f(t_new, w), dtype=float)

    def jacobian(y):
        w = 1.5 * y - y_n + 0.5 * y_nm1
        return 1.5 * (np.eye(y.size) - dt * _jacobian(problem, t_new, w))

    # second-order extrapolation as the initial guess
    y, report = newton(residual, jacobian, 2.0 * y_n - y_nm1, problem.solver_tol,
                       problem.max_iter, problem.norm)
    if not report.converged:
        raise SolverFailure(f"one-leg solve did not converge at t={t_new:g}", report)
    return y, report
