"""Desk-scale experiments shared by the command line and the acceptance tests.

Each function returns plain rows (dicts) plus a small summary dict.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .controller import ControllerConfig
from .driver import integrate
from .problems import ODE_PROBLEMS, PlateauForcing
from .spectral_nse import (
    ForcedTaylorGreen,
    SpectralGrid,
    energy_ledger,
    forced_tg_problem,
    random_solenoidal,
    run_nse_constant,
    taylor_green_exact,
)
from .verify import fit_slope

MODE_ALIASES = {
    "vsvo12": "vsvo12",
    "constant1": "constant_order1",
    "constant2": "constant_order2",
    "constant_order1": "constant_order1",
    "constant_order2": "constant_order2",
    "constant_double": "constant_double",
}


def _orders(dts, errs):
    out = [math.nan]
    for k in range(1, len(dts)):
        out.append(math.log(errs[k - 1] / errs[k]) / math.log(dts[k - 1] / dts[k]))
    return out


def relative_l2l2(problem, trajectory, norm=None) -> float:
    """sqrt(sum dt |e|^2 / sum dt |u|^2) over the accepted steps.

    A vanishing exact solution gives 0 for an exact run and inf otherwise.
    """
    norm = norm or problem.norm
    ts = trajectory.times
    num = den = 0.0
    for i in range(1, len(ts)):
        h = ts[i] - ts[i - 1]
        ex = problem.exact(ts[i])
        num += h * norm(trajectory.states[i] - ex) ** 2
        den += h * norm(ex) ** 2
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return math.sqrt(num / den)


# ODE convergence ---------------------------------------------------------

def ode_converge(problem: str = "decay", dts: Sequence[float] = (0.1, 0.05, 0.025, 0.0125),
                 T: float = 1.0):
    """Final-time errors of BE, BE + filter and BE + double filter."""
    prob = ODE_PROBLEMS[problem]()
    y0 = prob.exact(0.0)
    exact = prob.exact(T)
    errs = {m: [] for m in ("be", "filtered", "double")}
    modes = {"be": "constant_order1", "filtered": "constant_order2", "double": "constant_double"}
    for dt in dts:
        for key, mode in modes.items():
            traj, _ = integrate(prob, y0, 0.0, T, mode=mode, dt0=dt)
            errs[key].append(prob.norm(traj.states[-1] - exact))
    orders = {k: _orders(list(dts), v) for k, v in errs.items()}
    rows = [
        {"dt": dt, "err_be": errs["be"][i], "err_filtered": errs["filtered"][i],
         "err_double": errs["double"][i], "order_be": orders["be"][i],
         "order_filtered": orders["filtered"][i], "order_double": orders["double"][i]}
        for i, dt in enumerate(dts)
    ]
    summary = {f"slope_{k}": fit_slope(dts, v) for k, v in errs.items()}
    return rows, summary


ODE_SCHEMA = ["dt", "err_be", "err_filtered", "err_double", "order_be", "order_filtered",
              "order_double"]


# Taylor-Green convergence ------------------------------------------------

def nse_converge(N: int = 64, nu: float = 1.0, T: float = 0.5, dt: float = 0.05,
                 levels: int = 6, variant: str = "implicit"):
    """Relative velocity and pressure errors at T for BE and filtered runs."""
    grid = SpectralGrid(N, nu)
    u0, _ = taylor_green_exact(grid, 0.0)
    ue, pe = taylor_green_exact(grid, T)
    dts = [dt / 2 ** k for k in range(levels)]
    cols = {k: [] for k in ("u_be", "p_be", "u_filtered", "p_A", "p_B")}
    for h in dts:
        be = run_nse_constant(grid, u0, 0.0, T, h, method="be", variant=variant)
        fa = run_nse_constant(grid, u0, 0.0, T, h, option="A", variant=variant)
        fb = run_nse_constant(grid, u0, 0.0, T, h, option="B", variant=variant)
        cols["u_be"].append(grid.norm(be.velocity[-1] - ue) / grid.norm(ue))
        cols["p_be"].append(grid.norm(be.pressure[-1] - pe) / grid.norm(pe))
        cols["u_filtered"].append(grid.norm(fa.velocity[-1] - ue) / grid.norm(ue))
        cols["p_A"].append(grid.norm(fa.pressure[-1] - pe) / grid.norm(pe))
        cols["p_B"].append(grid.norm(fb.pressure[-1] - pe) / grid.norm(pe))
    orders = {k: _orders(dts, v) for k, v in cols.items()}
    rows = []
    for i, h in enumerate(dts):
        row = {"dt": h}
        for k in cols:
            row[f"err_{k}"] = cols[k][i]
            row[f"order_{k}"] = orders[k][i]
        rows.append(row)
    summary = {f"slope_{k}": fit_slope(dts, v) for k, v in cols.items()}
    summary["A_le_B"] = all(a <= b for a, b in zip(cols["p_A"], cols["p_B"]))
    return rows, summary


NSE_SCHEMA = ["dt"] + [f"{p}_{k}" for k in ("u_be", "p_be", "u_filtered", "p_A", "p_B")
                       for p in ("err", "order")]


# energy ------------------------------------------------------------------

def _energy_forcing(grid):
    shape = ForcedTaylorGreen(grid, lambda t: (1.0 + np.sin(t), np.cos(t)))
    return lambda t: shape(t)


def nse_energy(N: int = 64, nu: float = 0.1, dt: float = 0.01, steps: int = 50,
               forced: bool = False, option: str = "A", seed: int = 0,
               amplitude: float = 1.0, variant: str = "implicit"):
    """Per-step energy ledger of a constant-step filtered run from a random field."""
    grid = SpectralGrid(N, nu)
    u0 = random_solenoidal(grid, np.random.default_rng(seed), amplitude)
    forcing = _energy_forcing(grid) if forced else None
    run = run_nse_constant(grid, u0, 0.0, None, dt, option=option, forcing=forcing,
                           steps=steps, variant=variant)
    led = energy_ledger(grid, run, forcing, dt)
    rows = []
    cum = 0.0
    for j in range(len(led.D)):
        cum += led.D[j] + led.Z[j] - led.W[j]
        rows.append({"n": j + 1, "t": run.times[j + 2], "E": led.E[j + 1], "D": led.D[j],
                     "Z": led.Z[j], "W": led.W[j],
                     "residual": led.E[j + 1] + cum - led.E[0]})
    summary = {"residual": led.residual, "relative_residual": led.relative_residual,
               "E1": float(led.E[0])}
    return rows, summary


ENERGY_SCHEMA = ["n", "t", "E", "D", "Z", "W", "residual"]


# adaptivity --------------------------------------------------------------

def transition_problem(kind: str = "nse", N: int = 16, nu: float = 0.01, forcing=None):
    """The forced transition problem, as a spectral flow or its amplitude ODE."""
    forcing = forcing or PlateauForcing()
    if kind == "nse":
        return forced_tg_problem(SpectralGrid(N, nu), forcing)
    if kind == "ode":
        return ODE_PROBLEMS["forced_amplitude"](nu=nu, forcing=forcing)
    raise ValueError(f"unknown transition problem {kind!r}")


def _in_windows(t, dt, windows) -> bool:
    return any(t <= b and t + dt >= a for a, b in windows)


def adapt(tol: float = 1e-3, kind: str = "nse", N: int = 16, nu: float = 0.01,
          T: float = 10.0, dt0: Optional[float] = None, dt_max: float = 0.1,
          mode: str = "vsvo12"):
    """One run on the transition problem; rows are all attempts in order."""
    prob = transition_problem(kind, N, nu)
    forcing = prob.meta["forcing"]
    if hasattr(forcing, "F"):
        forcing = forcing.F
    mode = MODE_ALIASES[mode]
    cfg = ControllerConfig.for_interval(0.0, T, tol, dt_max=dt_max)
    traj, stats = integrate(prob, prob.meta["y0"], 0.0, T, cfg, mode=mode, dt0=dt0)
    windows = forcing.transition_windows(T)
    rows = [{"t": a.t, "dt": a.dt, "accepted": a.accepted, "order": a.order, "est1": a.est1,
             "est2": a.est2, "in_window": _in_windows(a.t, a.dt, windows)}
            for a in traj.attempts]
    rejected = [r for r in rows if not r["accepted"]]
    summary = {
        "accepted": stats.accepted, "rejected": stats.rejected,
        "order1": stats.accepted_by_order[1], "order2": stats.accepted_by_order[2],
        "rejected_in_windows": sum(r["in_window"] for r in rejected),
        "reject_fraction_in_windows": (sum(r["in_window"] for r in rejected) / len(rejected)
                                       if rejected else math.nan),
        "rel_error": relative_l2l2(prob, traj),
        "windows": windows,
    }
    return rows, summary


ADAPT_SCHEMA = ["t", "dt", "accepted", "order", "est1", "est2", "in_window"]


def work_precision(tols: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7),
                   dts: Sequence[float] = (0.1, 0.05, 0.02, 0.01, 0.005, 0.002),
                   kind: str = "nse", N: int = 16, nu: float = 0.01, T: float = 10.0,
                   dt_max: float = 0.1):
    """Steps taken (including rejections) against relative error.

    Adaptive runs sweep ``tols``; constant-step order-2 runs sweep ``dts``.
    """
    prob = transition_problem(kind, N, nu)
    rows = []
    for tol in tols:
        cfg = ControllerConfig.for_interval(0.0, T, tol, dt_max=dt_max)
        traj, stats = integrate(prob, prob.meta["y0"], 0.0, T, cfg)
        rows.append({"method": "vsvo12", "parameter": tol, "steps": stats.attempts,
                     "accepted": stats.accepted, "rejected": stats.rejected,
                     "rel_error": relative_l2l2(prob, traj)})
    for dt in dts:
        traj, stats = integrate(prob, prob.meta["y0"], 0.0, T, mode="constant_order2", dt0=dt)
        rows.append({"method": "constant_order2", "parameter": dt, "steps": stats.attempts,
                     "accepted": stats.accepted, "rejected": stats.rejected,
                     "rel_error": relative_l2l2(prob, traj)})
    return rows, {"dominance": dominance(rows)}


WORK_SCHEMA = ["method", "parameter", "steps", "accepted", "rejected", "rel_error"]


def dominance(rows, tol_max: float = 1e-4) -> dict:
    """Adaptive error over the constant-step error at equal work, per tolerance.

    The constant-step curve is interpolated linearly in log-log coordinates
    at the adaptive run's step count. Ratios below 1 mean the adaptive
    curve lies below.
    """
    const = sorted((r["steps"], r["rel_error"]) for r in rows if r["method"] != "vsvo12")
    ls = np.log([c[0] for c in const])
    le = np.log([c[1] for c in const])
    out = {}
    for r in rows:
        if r["method"] == "vsvo12" and r["parameter"] <= tol_max * (1 + 1e-12):
            ref = math.exp(np.interp(math.log(r["steps"]), ls, le))
            out[r["parameter"]] = r["rel_error"] / ref
    return out


# overhead ----------------------------------------------------------------

def overhead(N: int = 64, nu: float = 0.1, dt: float = 0.01, steps: int = 50, seed: int = 0,
             option: str = "B", variant: str = "implicit"):
    """Wall time inside filters against wall time inside backward Euler solves."""
    grid = SpectralGrid(N, nu)
    u0 = random_solenoidal(grid, np.random.default_rng(seed))
    run = run_nse_constant(grid, u0, 0.0, None, dt, option=option, steps=steps,
                           variant=variant)
    frac = run.time_filter / run.time_be
    rows = [{"N": N, "steps": steps, "time_be": run.time_be, "time_filter": run.time_filter,
             "filter_fraction": frac}]
    return rows, {"filter_fraction": frac}


OVERHEAD_SCHEMA = ["N", "steps", "time_be", "time_filter", "filter_fraction"]
