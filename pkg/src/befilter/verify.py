"""Executable checks of the algebraic identities, consistency rates,
equivalence of the two formulations, stability and estimator behaviour.

Every check returns plain numbers (residuals, slopes, ratios) so callers
decide on tolerances; :func:`run_all` bundles them with the default ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .driver import integrate
from .estimators import est1, est2
from .filters import filter_order2, filter_second, stencil_D, stencil_I
from .lin_space import inner, linear_combine, norm_l2
from .problems import cubic, decay, tracking
from .stepper import SOLVER_TOL, Problem, be_step, one_leg_step

#: the G matrix of the constant-step filtered method, as exact rationals
G_MATRIX = ((Fraction(3, 2), Fraction(-3, 4)), (Fraction(-3, 4), Fraction(1, 2)))


# algebraic identities ---------------------------------------------------

def check_identity(a: float, b: float, c: float) -> float:
    """Absolute residual of the product identity behind the energy equality.

    ``(3/2 a - 2b + c/2)(3/2 a - b + c/2)`` against the telescoping energy
    difference plus ``(3/4)(a - 2b + c)^2``.
    """
    lhs = (1.5 * a - 2.0 * b + 0.5 * c) * (1.5 * a - b + 0.5 * c)
    e_new = 0.25 * (a * a + (2 * a - b) ** 2 + (a - b) ** 2)
    e_old = 0.25 * (b * b + (2 * b - c) ** 2 + (b - c) ** 2)
    rhs = e_new - e_old + 0.75 * (a - 2 * b + c) ** 2
    return abs(lhs - rhs)


def g_form(u_n, u_nm1, G=G_MATRIX) -> float:
    """``[u_n, u_nm1] G [u_n; u_nm1]`` for vector-valued entries."""
    g = [[float(x) for x in row] for row in G]
    return (g[0][0] * inner(u_n, u_n) + (g[0][1] + g[1][0]) * inner(u_n, u_nm1)
            + g[1][1] * inner(u_nm1, u_nm1))


def check_g_form(u_n, u_nm1) -> float:
    """Absolute residual between the G quadratic form and the discrete energy."""
    u_n, u_nm1 = np.atleast_1d(np.asarray(u_n, float)), np.atleast_1d(np.asarray(u_nm1, float))
    energy = 0.25 * (norm_l2(u_n) ** 2 + norm_l2(2 * u_n - u_nm1) ** 2
                     + norm_l2(u_n - u_nm1) ** 2)
    return abs(g_form(u_n, u_nm1) - energy)


def random_identity_trials(trials: int = 1000, seed: int = 0, dim: int = 3):
    """Largest scaled residuals of both identities over random inputs.

    Residuals are divided by the squared largest magnitude of the inputs.
    Returns ``(identity_max, g_form_max)``.
    """
    rng = np.random.default_rng(seed)
    worst_id = worst_g = 0.0
    for _ in range(trials):
        scale = 10.0 ** rng.uniform(-3, 3)
        a, b, c = scale * rng.standard_normal(3)
        worst_id = max(worst_id, check_identity(a, b, c) / max(abs(a), abs(b), abs(c)) ** 2)
        u, v = scale * rng.standard_normal((2, dim))
        worst_g = max(worst_g, check_g_form(u, v) / max(np.abs(u).max(), np.abs(v).max()) ** 2)
    return worst_id, worst_g


def est2_quadratic_trials(trials: int = 1000, seed: int = 0, ratio_range=(0.1, 10.0)) -> float:
    """Largest scaled EST2 on samples of random quadratics at random step ratios."""
    rng = np.random.default_rng(seed)
    lo, hi = np.log(ratio_range[0]), np.log(ratio_range[1])
    worst = 0.0
    for _ in range(trials):
        h0 = 10.0 ** rng.uniform(-2, 0)
        rp, rc = np.exp(rng.uniform(lo, hi, 2))
        t = np.cumsum([0.0, h0, rp * h0, rc * rp * h0]) + rng.uniform(-1, 1)
        coef = rng.standard_normal(3)
        y = np.polyval(coef, t)
        e = est2(y[3], y[2], y[1], y[0], rc, rp)
        worst = max(worst, abs(float(e)) / max(1.0, np.abs(y).max()))
    return worst


# consistency rates -----------------------------------------------------

@dataclass
class RateReport:
    """Errors at decreasing step sizes and the least-squares log-log slope."""

    dts: list
    errors: list
    slope: float = field(init=False)

    def __post_init__(self):
        self.slope = fit_slope(self.dts, self.errors)

    @property
    def pairwise(self) -> np.ndarray:
        d, e = np.asarray(self.dts), np.asarray(self.errors)
        return np.log(e[:-1] / e[1:]) / np.log(d[:-1] / d[1:])


def fit_slope(dts: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(dt); nan below two points."""
    if len(dts) < 2:
        return float("nan")
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])


@dataclass
class ConsistencyReport:
    d_gap: RateReport
    i_gap: RateReport
    d_bound: list
    i_bound: list

    @property
    def bounds_hold(self) -> bool:
        return (all(e * e <= b for e, b in zip(self.d_gap.errors, self.d_bound))
                and all(e * e <= b for e, b in zip(self.i_gap.errors, self.i_bound)))


def consistency_rates(u: Callable, du: Callable, d2u: Callable, d3u: Callable,
                      t_new: float = 1.0, dts: Sequence[float] = (0.1, 0.05, 0.025, 0.0125, 0.00625)
                      ) -> ConsistencyReport:
    """Stencil gaps of D and I at ``t_new`` and their integral bounds.

    The D gap is ``|D[u]/dt - u'(t_new)|`` and the I gap is
    ``|I[u] - u(t_new)|``. The bounds are ``(6/5) dt^3 int |u'''|^2`` and
    ``(4/3) dt^3 int |u''|^2`` over ``[t_new - 2 dt, t_new]``, evaluated by
    adaptive quadrature.
    """
    d_err, i_err, d_bnd, i_bnd = [], [], [], []
    for dt in dts:
        w = [u(t_new), u(t_new - dt), u(t_new - 2 * dt)]
        d_err.append(abs(float(stencil_D(*w)) / dt - du(t_new)))
        i_err.append(abs(float(stencil_I(*w)) - u(t_new)))
        a, b = t_new - 2 * dt, t_new
        d_bnd.append(1.2 * dt ** 3 * quad(lambda s: d3u(s) ** 2, a, b, epsabs=0, epsrel=1e-13)[0])
        i_bnd.append(4.0 / 3.0 * dt ** 3 * quad(lambda s: d2u(s) ** 2, a, b, epsabs=0,
                                                 epsrel=1e-13)[0])
    dts = list(dts)
    return ConsistencyReport(RateReport(dts, d_err), RateReport(dts, i_err), d_bnd, i_bnd)


def sine_consistency(dts=(0.1, 0.05, 0.025, 0.0125, 0.00625)) -> ConsistencyReport:
    return consistency_rates(np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t),
                             dts=dts)


# equivalence of the two formulations -----------------------------------

def check_equivalence(problem: Problem, y0, y1, dt: float, steps: int, t0: float = 0.0) -> float:
    """Largest deviation between two-stage and one-leg iterates.

    Both formulations are marched independently from the same two starting
    values ``y0`` (at ``t0``) and ``y1`` (at ``t0 + dt``).
    """
    a = [np.atleast_1d(np.asarray(y0, float)), np.atleast_1d(np.asarray(y1, float))]
    b = list(a)
    worst = 0.0
    for n in range(1, steps):
        t = t0 + n * dt
        y_be, _ = be_step(problem, t, a[-1], dt)
        a.append(filter_order2(y_be, a[-1], a[-2], 1.0))
        y, _ = one_leg_step(problem, t, b[-1], b[-2], dt)
        b.append(y)
        worst = max(worst, float(np.max(np.abs(a[-1] - b[-1]))))
    return worst


def check_equivalence_nse(N: int = 32, nu: float = 0.1, dt: float = 0.01, steps: int = 100,
                          option: str = "A", seed: int = 0, amplitude: float = 1.0):
    """Deviation between the two-stage NSE step and the one-leg NSE solve.

    At every step the one-leg system is solved from the two-stage history;
    returns the largest RMS velocity and pressure deviations.
    """
    from .spectral_nse import (SpectralGrid, one_leg_nse_step, random_solenoidal,
                               run_nse_constant)

    grid = SpectralGrid(N, nu)
    u0 = random_solenoidal(grid, np.random.default_rng(seed), amplitude)
    run = run_nse_constant(grid, u0, 0.0, None, dt, option=option, steps=steps)
    du = dp = 0.0
    for n in range(1, steps):
        u, p, _ = one_leg_nse_step(grid, run.velocity[n], run.velocity[n - 1], run.times[n + 1],
                                   dt, option=option, p_n=run.pressure[n],
                                   p_nm1=run.pressure[n - 1])
        du = max(du, grid.rms(u - run.velocity[n + 1]))
        dp = max(dp, grid.rms(p - run.pressure[n + 1]))
    return du, dp


# stability -------------------------------------------------------------

@dataclass
class StabilityProbe:
    iterates: np.ndarray
    root_modulus: float
    invariant_ratio: np.ndarray
    g_energy: np.ndarray

    @property
    def asymptotic_ratio(self) -> float:
        return float(self.invariant_ratio[-1])

    @property
    def bounded(self) -> bool:
        y = np.abs(self.iterates)
        return bool(np.all(y[1:] <= y[0] * (1 + 1e-12)))

    @property
    def energy_monotone(self) -> bool:
        return bool(np.all(np.diff(self.g_energy) <= 1e-14 * self.g_energy[:-1]))


def a_stability_probe(z: float = -1e6, steps: int = 100) -> StabilityProbe:
    """Run the constant-step filtered method on ``y' = lam y`` with ``lam dt = z``.

    The filtered recurrence is ``y+ = a y - b y-`` with
    ``a = (2/3)(1 + 1/(1 - z))`` and ``b = 1/3``. Its iterates oscillate, so
    the per-step contraction is measured through the invariant
    ``H_n = y_n^2 - a y_n y_{n-1} + b y_{n-1}^2``, which satisfies
    ``H_{n+1} = b H_n`` exactly; ``sqrt(H_{n+1}/H_n)`` is the root modulus.
    """
    traj, _ = integrate(decay(lam=z), 1.0, 0.0, float(steps), mode="constant_order2", dt0=1.0)
    y = np.array([float(s[0]) for s in traj.states])
    a = (2.0 / 3.0) * (1.0 + 1.0 / (1.0 - z))
    b = 1.0 / 3.0
    H = y[1:] ** 2 - a * y[1:] * y[:-1] + b * y[:-1] ** 2
    ratio = np.sqrt(H[1:] / H[:-1])
    roots = np.roots([1.0, -a, b])
    energy = np.array([g_form(y[n], y[n - 1]) for n in range(1, len(y))])
    return StabilityProbe(y, float(np.max(np.abs(roots))), ratio, energy)


# local truncation errors -------------------------------------------------

def local_errors(problem: Problem, dt: float, t_n: float):
    """Local errors of the BE, singly and doubly filtered values and both estimates.

    The step starts from exact history at ``t_n - 2dt, t_n - dt, t_n``.
    Returns a dict of scalars.
    """
    ex = problem.exact
    y_nm2, y_nm1, y_n = ex(t_n - 2 * dt), ex(t_n - dt), ex(t_n)
    y_true = ex(t_n + dt)
    y_be, _ = be_step(problem, t_n, y_n, dt)
    y2 = filter_order2(y_be, y_n, y_nm1, 1.0)
    y3 = filter_second(y2, y_n, y_nm1, y_nm2, 1.0, 1.0)
    return {
        "be": float((y_be - y_true)[0]),
        "filter": float((y2 - y_true)[0]),
        "double": float((y3 - y_true)[0]),
        "est1": float(est1(y_be, y2)[0]),
        "est2": float(est2(y2, y_n, y_nm1, y_nm2, 1.0, 1.0)[0]),
    }


def lte_drop_ratio(problem: Problem | None = None, dt: float = 1e-3, samples: int = 25) -> float:
    """RMS local error of the singly filtered value over that of the doubly filtered one.

    Defaults to a tracking problem whose third derivative dominates
    ``f_y y''``, so the drop should be large.
    """
    problem = problem or tracking()
    ts = np.linspace(0.5, 2.0, samples)
    single = [local_errors(problem, dt, t)["filter"] for t in ts]
    double = [local_errors(problem, dt, t)["double"] for t in ts]
    return float(np.sqrt(np.mean(np.square(single)) / np.mean(np.square(double))))


def lte_coefficients(problem: Problem, dt: float, t_n: float):
    """Measured truncation errors over ``dt^3`` next to the Taylor predictions.

    Predictions: ``-(1/3 y''' + 1/2 f_y y'')`` for the singly filtered value
    and ``-(1/2) f_y y''`` for the doubly filtered one, derivatives taken at
    the new time. These are residual-type truncation errors; the local
    error of the computed value is minus the truncation error over the
    leading coefficient of the induced multistep method (3/2 and 11/6), so
    the measured local error is rescaled by that factor. Derivatives come
    from central differences of the exact solution.
    """
    h = 1e-3
    ex = lambda s: float(problem.exact(s)[0])
    t = t_n + dt
    d2 = (ex(t + h) - 2 * ex(t) + ex(t - h)) / h ** 2
    d3 = (ex(t + 2 * h) - 2 * ex(t + h) + 2 * ex(t - h) - ex(t - 2 * h)) / (2 * h ** 3)
    fy = float(np.atleast_2d(problem.jac(t, problem.exact(t)))[0, 0])
    errs = local_errors(problem, dt, t_n)
    return {
        "filter": (-1.5 * errs["filter"] / dt ** 3, -(d3 / 3 + 0.5 * fy * d2)),
        "double": (-(11.0 / 6.0) * errs["double"] / dt ** 3, -0.5 * fy * d2),
    }


# bundle ----------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool


def run_all(seed: int = 0, trials: int = 1000) -> list:
    """Run every check with its default tolerance."""
    out = []

    def add(name, value, threshold, passed=None):
        ok = value <= threshold if passed is None else passed
        out.append(CheckResult(name, float(value), float(threshold), bool(ok)))

    id_res, g_res = random_identity_trials(trials, seed)
    add("identity", id_res, 1e-12)
    add("g_form", g_res, 1e-12)
    add("est2_quadratic", est2_quadratic_trials(trials, seed), 1e-12)
    cons = sine_consistency()
    add("consistency_slope_D", abs(cons.d_gap.slope - 2.0), 0.1)
    add("consistency_slope_I", abs(cons.i_gap.slope - 2.0), 0.1)
    add("consistency_bounds", 0.0, 0.0, cons.bounds_hold)
    dt = 0.1
    for name, prob in (("decay", decay()), ("cubic", cubic())):
        y1, _ = be_step(prob, 0.0, prob.exact(0.0), dt)
        add(f"equivalence_{name}", check_equivalence(prob, prob.exact(0.0), y1, dt, 100),
            10 * SOLVER_TOL)
    for option in ("A", "B"):
        du, dp = check_equivalence_nse(option=option, seed=seed)
        add(f"equivalence_nse_{option}", max(du, dp), 10 * SOLVER_TOL)
    probe = a_stability_probe()
    add("a_stability_ratio", abs(probe.asymptotic_ratio - np.sqrt(1.0 / 3.0)), 1e-3,
        probe.bounded and probe.energy_monotone
        and abs(probe.asymptotic_ratio - np.sqrt(1.0 / 3.0)) <= 1e-3)
    ratio = lte_drop_ratio()
    add("lte_drop_ratio", ratio, 1.5, ratio >= 1.5)
    return out
