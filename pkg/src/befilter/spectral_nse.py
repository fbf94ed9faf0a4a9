"""Pseudo-spectral 2D periodic incompressible Navier-Stokes testbed.

Velocity fields are stored as ``numpy.fft.fft2`` coefficients of shape
``(2, N, N)`` on the box [0, 2pi]^2 (axis 0 of each component is x, axis 1
is y). Pressure is an ``(N, N)`` coefficient array. Every field produced here
lives inside the 2/3-rule band, which makes the discrete convection term
exactly energy neutral.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .filters import filter_order2, stencil_I
from .lin_space import linear_combine
from .problems import PlateauForcing
from .stepper import MAX_ITER, SOLVER_TOL, Problem, SolverFailure, SolverReport

_EPS = np.finfo(float).eps
TWO_PI = 2.0 * np.pi


class SpectralGrid:
    """Wavenumbers, dealiasing mask and transforms for an N x N periodic grid."""

    def __init__(self, N: int = 64, nu: float = 1.0):
        if N < 4 or N & (N - 1):
            raise ValueError(f"N must be a power of two >= 4, got {N}")
        if not nu > 0:
            raise ValueError(f"nu must be positive, got {nu}")
        self.N = int(N)
        self.nu = float(nu)
        k = np.fft.fftfreq(N, 1.0 / N)
        self.kx, self.ky = np.meshgrid(k, k, indexing="ij")
        self.k = np.stack([self.kx, self.ky])
        self.k2 = self.kx ** 2 + self.ky ** 2
        self.k2_safe = np.where(self.k2 == 0, 1.0, self.k2)
        kmax = (N - 1) // 3
        self.mask = (np.abs(self.kx) <= kmax) & (np.abs(self.ky) <= kmax)
        x = TWO_PI * np.arange(N) / N
        self.x, self.y = np.meshgrid(x, x, indexing="ij")

    # transforms ---------------------------------------------------------
    def fft(self, f):
        return np.fft.fft2(f, axes=(-2, -1))

    def ifft(self, f_hat):
        return np.real(np.fft.ifft2(f_hat, axes=(-2, -1)))

    # norms --------------------------------------------------------------
    @property
    def _weight(self):
        return TWO_PI ** 2 / self.N ** 4

    def inner(self, u_hat, v_hat) -> float:
        """L2 inner product over the box, from Fourier coefficients (Parseval)."""
        return float(self._weight * np.real(np.vdot(v_hat, u_hat)))

    def norm(self, u_hat) -> float:
        """Domain-weighted L2 norm."""
        return float(np.sqrt(self._weight * np.sum(np.abs(u_hat) ** 2)))

    def grad_norm(self, u_hat) -> float:
        """L2 norm of the gradient."""
        return float(np.sqrt(self._weight * np.sum(self.k2 * np.abs(u_hat) ** 2)))

    def rms(self, u_hat) -> float:
        """Root mean square of the physical values over all grid points."""
        with np.errstate(over="ignore", invalid="ignore"):
            return float(np.sqrt(np.sum(np.abs(u_hat) ** 2) / u_hat.size) / self.N)

    def divergence(self, u_hat):
        return 1j * (self.kx * u_hat[0] + self.ky * u_hat[1])


def leray_project(grid: SpectralGrid, u_hat):
    """Remove the gradient part of each Fourier mode: u - k (k.u) / |k|^2."""
    kdotu = grid.kx * u_hat[0] + grid.ky * u_hat[1]
    return u_hat - grid.k * (kdotu / grid.k2_safe)


def nonlinear_term(grid: SpectralGrid, w_hat, u_hat=None):
    """Skew-symmetric convection ``w.grad u + (1/2)(div w) u``, dealiased.

    With ``u_hat`` omitted the self-advection ``B(w, w)`` is returned.
    """
    if u_hat is None:
        u_hat = w_hat
    w = grid.ifft(w_hat)
    div_w = grid.ifft(grid.divergence(w_hat))
    out = np.empty_like(u_hat)
    for c in range(2):
        ux = grid.ifft(1j * grid.kx * u_hat[c])
        uy = grid.ifft(1j * grid.ky * u_hat[c])
        uc = grid.ifft(u_hat[c])
        out[c] = grid.fft(w[0] * ux + w[1] * uy + 0.5 * div_w * uc)
    return out * grid.mask


def pressure_from_momentum(grid: SpectralGrid, rhs_hat):
    """Mean-zero pressure whose gradient balances the gradient part of ``rhs``.

    ``rhs`` is forcing minus convection; the time derivative and viscous
    terms are solenoidal and drop out of the divergence.
    """
    p_hat = -1j * (grid.kx * rhs_hat[0] + grid.ky * rhs_hat[1]) / grid.k2_safe
    p_hat[0, 0] = 0.0
    return p_hat


def be_nse_step(grid: SpectralGrid, u_n, t_new: float, dt: float,
                forcing: Optional[Callable] = None, variant: str = "implicit",
                u_star=None, tol: float = SOLVER_TOL, max_iter: int = MAX_ITER,
                guess=None):
    """One backward Euler step of the Navier-Stokes equations.

    Solves ``(u - u_n)/dt + B(w, u) - nu lap u + grad p = f(t_new)``,
    ``div u = 0``, with ``w = u`` (``variant="implicit"``) or the explicit
    ``w = u_star`` (``"linearly_implicit"``). Convection is handled by a
    Picard iteration; the viscous term is diagonal in Fourier space.

    Returns
    -------
    (u_hat, p_hat, SolverReport)

    Raises
    ------
    SolverFailure
        If the Picard iteration does not reach ``tol`` on the RMS momentum
        residual within ``max_iter`` iterations.
    """
    if variant not in ("implicit", "linearly_implicit"):
        raise ValueError(f"unknown variant {variant!r}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if variant == "linearly_implicit" and u_star is None:
        raise ValueError("linearly implicit step needs u_star")
    f_hat = np.zeros_like(u_n) if forcing is None else forcing(t_new) * grid.mask
    lhs = 1.0 + dt * grid.nu * grid.k2
    base = u_n + dt * f_hat
    u = np.array(u_n if guess is None else guess, dtype=complex)
    for it in range(max_iter + 1):
        conv = nonlinear_term(grid, u if variant == "implicit" else u_star, u)
        u_next = leray_project(grid, base - dt * conv) * grid.mask / lhs
        res = grid.rms(lhs * (u - u_next))
        floor = 16 * _EPS * max(1.0, grid.rms(u))
        if res <= max(tol, floor):
            p = pressure_from_momentum(grid, (f_hat - conv) * grid.mask)
            return u, p, SolverReport(it, res, True)
        if not np.isfinite(res) or it == max_iter:
            break
        u = u_next
    report = SolverReport(it, float(res), False)
    raise SolverFailure(
        f"Picard iteration did not converge at t={t_new:g} (residual {res:.3e})", report)


def filter_step_nse(u_be, u_n, u_nm1, r_cur: float, option: str = "A",
                    p_be=None, p_n=None, p_nm1=None):
    """Filter the velocity; filter the pressure too under option ``"B"``.

    Returns ``(u, p)``. Under option ``"A"`` the backward Euler pressure is
    passed through untouched.
    """
    if option not in ("A", "B"):
        raise ValueError(f"option must be 'A' or 'B', got {option!r}")
    u = filter_order2(u_be, u_n, u_nm1, r_cur)
    if option == "A" or p_be is None:
        return u, p_be
    return u, filter_order2(p_be, p_n, p_nm1, r_cur)


def one_leg_nse_step(grid: SpectralGrid, u_n, u_nm1, t_new: float, dt: float,
                     forcing: Optional[Callable] = None, option: str = "A",
                     p_n=None, p_nm1=None, tol: float = SOLVER_TOL,
                     max_iter: int = MAX_ITER):
    """Constant-step one-leg form solved directly for the new velocity.

    Solves ``D[u]/dt + B(I[u], I[u]) - nu lap I[u] + grad q = f`` with a
    Picard iteration on ``u`` itself, where ``q = p`` (option A) or
    ``q = I[p]`` (option B). Returns ``(u, p, SolverReport)``.
    """
    if option not in ("A", "B"):
        raise ValueError(f"option must be 'A' or 'B', got {option!r}")
    f_hat = np.zeros_like(u_n) if forcing is None else forcing(t_new) * grid.mask
    visc = dt * grid.nu * grid.k2
    lhs = 1.5 * (1.0 + visc)
    tail = u_n - 0.5 * u_nm1
    base = 2.0 * u_n - 0.5 * u_nm1 + visc * tail
    u = np.array(2.0 * u_n - u_nm1, dtype=complex)
    for it in range(max_iter + 1):
        w = 1.5 * u - tail
        conv = nonlinear_term(grid, w)
        u_next = leray_project(grid, base + dt * (f_hat - conv)) * grid.mask / lhs
        res = grid.rms(lhs * (u - u_next)) / 1.5
        floor = 16 * _EPS * max(1.0, grid.rms(u))
        if res <= max(tol, floor):
            q = pressure_from_momentum(grid, (f_hat - conv) * grid.mask)
            p = q if option == "A" else (2.0 / 3.0) * (q + p_n - 0.5 * p_nm1)
            return u, p, SolverReport(it, res, True)
        if not np.isfinite(res) or it == max_iter:
            break
        u = u_next
    raise SolverFailure(f"one-leg Picard iteration did not converge at t={t_new:g}",
                        SolverReport(it, float(res), False))


# exact solutions and forcing -------------------------------------------

def tg_shape(grid: SpectralGrid):
    """Coefficients of (cos x sin y, -sin x cos y)."""
    phys = np.stack([np.cos(grid.x) * np.sin(grid.y), -np.sin(grid.x) * np.cos(grid.y)])
    return grid.fft(phys)


def tg_pressure_shape(grid: SpectralGrid):
    """Coefficients of -(1/4)(cos 2x + cos 2y)."""
    return grid.fft(-0.25 * (np.cos(2 * grid.x) + np.cos(2 * grid.y)))


def taylor_green_exact(grid: SpectralGrid, t: float, nu: Optional[float] = None):
    """Decaying Taylor-Green vortex: velocity and pressure coefficients at time t."""
    nu = grid.nu if nu is None else nu
    a = np.exp(-2.0 * nu * t)
    return a * tg_shape(grid), a * a * tg_pressure_shape(grid)


def random_solenoidal(grid: SpectralGrid, rng: np.random.Generator, amplitude: float = 1.0,
                      kmax: int = 4):
    """Random real divergence-free band-limited field with RMS ``amplitude``."""
    raw = rng.standard_normal((2, grid.N, grid.N))
    u = grid.fft(raw)
    keep = (np.abs(grid.kx) <= kmax) & (np.abs(grid.ky) <= kmax) & (grid.k2 > 0)
    u = leray_project(grid, u * keep)
    return u * (amplitude / grid.rms(u))


@dataclass
class ForcedTaylorGreen:
    """Body force ``(2 nu F + F') * TG`` whose solution is ``F(t) * TG``."""

    grid: SpectralGrid
    F: Callable = field(default_factory=PlateauForcing)

    def __post_init__(self):
        self._shape = tg_shape(self.grid)
        self._pshape = tg_pressure_shape(self.grid)

    def _values(self, t):
        if hasattr(self.F, "value_and_derivative"):
            a, da = self.F.value_and_derivative(t)
        else:
            a, da = self.F(t)
        return float(a), float(da)

    def __call__(self, t):
        a, da = self._values(t)
        return (2.0 * self.grid.nu * a + da) * self._shape

    def velocity(self, t):
        return self._values(t)[0] * self._shape

    def pressure(self, t):
        a = self._values(t)[0]
        return a * a * self._pshape


def forced_tg_problem(grid: SpectralGrid, F=None, variant: str = "implicit",
                      tol: float = SOLVER_TOL, max_iter: int = MAX_ITER) -> Problem:
    """Forced Taylor-Green flow packaged for :func:`befilter.driver.integrate`.

    ``F`` supplies ``value_and_derivative(t)`` (or returns the pair when
    called). The exact solution with ``u(0) = F(0) TG`` is ``F(t) TG``.
    """
    forcing = ForcedTaylorGreen(grid, F if F is not None else PlateauForcing())

    def implicit_solve(t_new, u_prev, dt, lin):
        u, _, report = be_nse_step(grid, u_prev, t_new, dt, forcing, variant,
                                   u_star=lin if lin is not None else u_prev,
                                   tol=tol, max_iter=max_iter,
                                   guess=lin if lin is not None else u_prev)
        return u, report

    def rhs(t, u):
        conv = nonlinear_term(grid, u)
        return leray_project(grid, forcing(t) * grid.mask - conv) - grid.nu * grid.k2 * u

    return Problem(rhs=rhs, implicit_solve=implicit_solve, norm=grid.norm,
                   linearly_implicit=variant == "linearly_implicit", solver_tol=tol,
                   max_iter=max_iter, exact=forcing.velocity, name="forced_tg",
                   meta={"y0": forcing.velocity(0.0), "forcing": forcing, "grid": grid})


# constant-step runs ----------------------------------------------------

@dataclass
class NSERun:
    """Accepted velocity and pressure history of a constant-step run."""

    times: list
    velocity: list
    pressure: list
    report_iterations: int = 0
    time_be: float = 0.0
    time_filter: float = 0.0


def run_nse_constant(grid: SpectralGrid, u0, t0: float, T: float, dt: float,
                     method: str = "filter", option: str = "A", variant: str = "implicit",
                     forcing: Optional[Callable] = None, start: str = "richardson",
                     tol: float = SOLVER_TOL, steps: Optional[int] = None) -> NSERun:
    """March the Navier-Stokes testbed at constant ``dt``.

    ``method`` is ``"be"`` (plain backward Euler) or ``"filter"``. The second
    starting value comes from Richardson extrapolation of one full and two
    half backward Euler steps (velocity and pressure alike) unless
    ``start="be"``. If ``steps`` is given it overrides ``T``.

    Time spent inside backward Euler solves and inside the filter is
    accumulated separately for overhead measurements.
    """
    if method not in ("be", "filter"):
        raise ValueError(f"unknown method {method!r}")
    if steps is None:
        steps = max(1, int(round((T - t0) / dt)))
    ts = [t0 + k * dt for k in range(steps + 1)]
    f0 = np.zeros_like(u0) if forcing is None else forcing(t0) * grid.mask
    p0 = pressure_from_momentum(grid, f0 - nonlinear_term(grid, u0))
    run = NSERun([ts[0]], [u0], [p0])

    def be(u_prev, t_new, h, u_star=None):
        tic = time.perf_counter()
        u, p, rep = be_nse_step(grid, u_prev, t_new, h, forcing, variant,
                                u_star=u_star if u_star is not None else u_prev, tol=tol,
                                guess=u_star)
        run.time_be += time.perf_counter() - tic
        run.report_iterations += rep.iterations
        return u, p

    for n in range(1, steps + 1):
        t_new = ts[n]
        u_n, p_n = run.velocity[-1], run.pressure[-1]
        if method == "be":
            u, p = be(u_n, t_new, dt)
        elif n == 1:
            u, p = be(u_n, t_new, dt)
            if start == "richardson":
                u_h, _ = be(u_n, t_new - 0.5 * dt, 0.5 * dt)
                u_2, p_2 = be(u_h, t_new, 0.5 * dt)
                u = linear_combine([2.0, -1.0], [u_2, u])
                p = linear_combine([2.0, -1.0], [p_2, p])
        else:
            u_nm1, p_nm1 = run.velocity[-2], run.pressure[-2]
            u_star = linear_combine([2.0, -1.0], [u_n, u_nm1])
            u_be, p_be = be(u_n, t_new, dt, u_star)
            tic = time.perf_counter()
            u, p = filter_step_nse(u_be, u_n, u_nm1, 1.0, option, p_be, p_n, p_nm1)
            run.time_filter += time.perf_counter() - tic
        run.times.append(t_new)
        run.velocity.append(u)
        run.pressure.append(p)
    return run


# energy diagnostics ----------------------------------------------------

@dataclass
class EnergyLedger:
    """Per-step energy terms of a constant-step filtered run.

    Row ``j`` refers to the step producing ``u[j + 2]`` from ``u[j + 1]`` and
    ``u[j]``. ``E`` has one more entry: ``E[0]`` is the energy of
    ``(u[1], u[0])``.
    """

    E: np.ndarray
    D: np.ndarray
    Z: np.ndarray
    W: np.ndarray

    @property
    def residual(self) -> float:
        """E^N + sum D + sum Z - sum W - E^1."""
        return float(self.E[-1] + self.D.sum() + self.Z.sum() - self.W.sum() - self.E[0])

    @property
    def relative_residual(self) -> float:
        scale = max(abs(self.E[0]), abs(self.W).sum(), np.finfo(float).tiny)
        return abs(self.residual) / scale


def discrete_energy(grid: SpectralGrid, u_n, u_nm1) -> float:
    """(1/4)[|u_n|^2 + |2u_n - u_nm1|^2 + |u_n - u_nm1|^2]."""
    return 0.25 * (grid.norm(u_n) ** 2 + grid.norm(2 * u_n - u_nm1) ** 2
                   + grid.norm(u_n - u_nm1) ** 2)


def energy_ledger(grid: SpectralGrid, run: NSERun, forcing: Optional[Callable] = None,
                  dt: Optional[float] = None) -> EnergyLedger:
    """Energy, viscous and numerical dissipation and work along a run."""
    u, ts = run.velocity, run.times
    dt = ts[1] - ts[0] if dt is None else dt
    E = [discrete_energy(grid, u[1], u[0])]
    D, Z, W = [], [], []
    for n in range(1, len(u) - 1):
        I_u = stencil_I(u[n + 1], u[n], u[n - 1])
        E.append(discrete_energy(grid, u[n + 1], u[n]))
        D.append(dt * grid.nu * grid.grad_norm(I_u) ** 2)
        Z.append(0.75 * grid.norm(u[n + 1] - 2 * u[n] + u[n - 1]) ** 2)
        w = 0.0 if forcing is None else dt * grid.inner(forcing(ts[n + 1]) * grid.mask, I_u)
        W.append(w)
    return EnergyLedger(np.array(E), np.array(D), np.array(Z), np.array(W))


# snapshots -------------------------------------------------------------

def write_snapshot(path, grid: SpectralGrid, t: float, u_hat, p_hat) -> None:
    """Write physical u, v, p on the grid as CSV in row-major order.

    The first line is ``# N=<N> t=<t> components=u,v,p``; then a header
    ``i,j,u,v,p`` where ``i`` indexes x and ``j`` indexes y.
    """
    u = grid.ifft(u_hat)
    p = grid.ifft(p_hat)
    with open(path, "w", newline="") as fh:
        fh.write(f"# N={grid.N} t={float(t)!r} components=u,v,p\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "u", "v", "p"])
        for i in range(grid.N):
            for j in range(grid.N):
                w.writerow([i, j, format(u[0, i, j], ".17g"), format(u[1, i, j], ".17g"),
                            format(p[i, j], ".17g")])


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`: returns ``(N, t, u, v, p)`` physical arrays."""
    with open(path, newline="") as fh:
        meta = dict(item.split("=", 1) for item in fh.readline()[1:].split())
        N, t = int(meta["N"]), float(meta["t"])
        reader = csv.reader(fh)
        next(reader)
        data = np.zeros((3, N, N))
        for row in reader:
            i, j = int(row[0]), int(row[1])
            data[:, i, j] = [float(v) for v in row[2:5]]
    return N, t, data[0], data[1], data[2]
