"""Scalar and small-system test problems with known solutions."""

from __future__ import annotations

import numpy as np

from .stepper import Problem


def decay(lam: float = -1.0, y0: float = 1.0) -> Problem:
    """Dahlquist problem y' = lam * y."""
    return Problem(
        rhs=lambda t, y: lam * y,
        jac=lambda t, y: np.array([[lam]]),
        exact=lambda t: np.array([y0 * np.exp(lam * t)]),
        name="decay",
        meta={"y0": y0, "lam": lam},
    )


def cubic(y0: float = 1.0) -> Problem:
    """y' = -y**3, with y(t) = y0 / sqrt(1 + 2 y0^2 t)."""
    return Problem(
        rhs=lambda t, y: -y ** 3,
        jac=lambda t, y: np.diag(-3.0 * y ** 2),
        exact=lambda t: np.array([y0 / np.sqrt(1.0 + 2.0 * y0 * y0 * t)]),
        name="cubic",
        meta={"y0": y0},
    )


def zero() -> Problem:
    return Problem(rhs=lambda t, y: np.zeros_like(y), jac=lambda t, y: np.zeros((y.size, y.size)),
                   exact=lambda t: np.array([1.0]), name="zero", meta={"y0": 1.0})


def quadratic() -> Problem:
    """y' = 2t, y = t**2: filters and estimators are exact on it."""
    return Problem(rhs=lambda t, y: np.full_like(y, 2.0 * t),
                   jac=lambda t, y: np.zeros((y.size, y.size)),
                   exact=lambda t: np.array([t * t]), name="quadratic", meta={"y0": 0.0})


def tracking(lam: float = -0.1, omega: float = 4.0) -> Problem:
    """y' = lam (y - sin(omega t)) + omega cos(omega t), solution sin(omega t).

    With small ``|lam|`` the third derivative dominates the local error of
    the singly filtered method while ``f_y y''`` stays small.
    """
    def rhs(t, y):
        return lam * (y - np.sin(omega * t)) + omega * np.cos(omega * t)

    return Problem(rhs=rhs, jac=lambda t, y: np.array([[lam]]),
                   exact=lambda t: np.array([np.sin(omega * t)]), name="tracking",
                   meta={"y0": 0.0, "lam": lam, "omega": omega})


def transition_g(t):
    """Smooth switch: 0 for t <= 0, exp(-1/(10 t)^10) for t > 0.

    Returns the value and its derivative.
    """
    t = np.asarray(t, dtype=float)
    pos = t > 0
    tp = np.where(pos, t, 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        x = (10.0 * tp) ** -10
        g = np.where(pos, np.exp(-x), 0.0)
        dg = np.where(g > 0, g * 100.0 * (10.0 * tp) ** -11, 0.0)
    return g, dg


class PlateauForcing:
    """Amplitude F(t): a sum of plateaus built from shifted and reflected switches.

    Each plateau ``(on, off)`` contributes ``g((t - on)/w) * g((off - t)/w)``,
    so F rises from 0 to 1 just after ``on`` and falls back just before
    ``off``.
    """

    def __init__(self, plateaus=((1.0, 4.0), (6.0, 9.0)), width: float = 1.0):
        self.plateaus = tuple(tuple(map(float, p)) for p in plateaus)
        self.width = float(width)

    def __call__(self, t):
        return self.value_and_derivative(t)[0]

    def derivative(self, t):
        return self.value_and_derivative(t)[1]

    def value_and_derivative(self, t):
        w = self.width
        F = np.zeros_like(np.asarray(t, dtype=float))
        dF = np.zeros_like(F)
        for on, off in self.plateaus:
            a, da = transition_g((t - on) / w)
            b, db = transition_g((off - t) / w)
            F = F + a * b
            dF = dF + (da * b - a * db) / w
        return F, dF

    def transition_windows(self, t_end: float, rel_threshold: float = 1e-6, samples: int = 200001):
        """Intervals where |F'| exceeds ``rel_threshold * max|F'|`` on [0, t_end]."""
        ts = np.linspace(0.0, t_end, samples)
        dF = np.abs(self.derivative(ts))
        active = dF > rel_threshold * dF.max()
        windows = []
        start = None
        for i, on in enumerate(active):
            if on and start is None:
                start = ts[i]
            if not on and start is not None:
                windows.append((start, ts[i - 1]))
                start = None
        if start is not None:
            windows.append((start, ts[-1]))
        return windows


def forced_amplitude(nu: float = 0.01, forcing: PlateauForcing | None = None) -> Problem:
    """Scalar amplitude equation of the forced Taylor-Green mode.

    a' = -2 nu a + 2 nu F + F', whose solution with a(0) = F(0) is F.
    """
    forcing = forcing or PlateauForcing()

    def rhs(t, y):
        F, dF = forcing.value_and_derivative(t)
        return -2.0 * nu * y + 2.0 * nu * F + dF

    return Problem(rhs=rhs, jac=lambda t, y: np.array([[-2.0 * nu]]),
                   exact=lambda t: np.atleast_1d(forcing(t)), name="forced_amplitude",
                   meta={"y0": float(forcing(0.0)), "nu": nu, "forcing": forcing})


ODE_PROBLEMS = {
    "decay": decay,
    "cubic": cubic,
    "zero": zero,
    "quadratic": quadratic,
    "tracking": tracking,
    "forced_amplitude": forced_amplitude,
}
