"""Command-line harness for the experiments.

Options come from flags, then from an optional ``--config`` file of
``key=value`` lines, then from built-in defaults. Exit status: 0 on
success, 2 for configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from . import experiments as ex
from .controller import ControllerConfig, IntegrationFailure
from .output import write_csv
from .stepper import SolverFailure
from .verify import run_all

log = logging.getLogger("befilter")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    pass


def float_list(text: str) -> list:
    """Comma list of floats, or a decade range ``1e-1..1e-7``."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = (float(x) for x in text.split(".."))
        if lo <= 0 or hi <= 0:
            raise ConfigError(f"decade range needs positive ends: {text!r}")
        a, b = round(math.log10(lo)), round(math.log10(hi))
        step = -1 if b < a else 1
        return [10.0 ** e for e in range(a, b + step, step)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"not a list of numbers: {text!r}") from None


def boolean(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def choice(*values):
    def conv(text):
        if text not in values:
            raise ConfigError(f"{text!r} is not one of {values}")
        return text
    return conv


# option name -> (converter, default, help)
COMMON = {"out": (str, None, "output CSV path (stdout if omitted)")}
COMMANDS = {
    "ode-converge": {
        "problem": (choice("decay", "cubic", "tracking"), "decay", "ODE test problem"),
        "dts": (float_list, "0.1,0.05,0.025,0.0125", "step sizes"),
        "T": (float, 1.0, "final time"),
    },
    "nse-converge": {
        "N": (int, 64, "modes per direction"),
        "nu": (float, 1.0, "viscosity"),
        "T": (float, 0.5, "final time"),
        "dt": (float, 0.05, "largest step; halved levels-1 times"),
        "levels": (int, 6, "number of step sizes"),
        "variant": (choice("implicit", "linearly_implicit"), "implicit", "convection treatment"),
    },
    "nse-energy": {
        "N": (int, 64, "modes per direction"),
        "nu": (float, 0.1, "viscosity"),
        "dt": (float, 0.01, "step size"),
        "steps": (int, 50, "number of steps"),
        "forced": (boolean, False, "apply a time-dependent body force"),
        "option": (choice("A", "B"), "A", "pressure filter option"),
        "variant": (choice("implicit", "linearly_implicit"), "implicit", "convection treatment"),
        "seed": (int, 0, "seed of the random initial field"),
    },
    "adapt": {
        "problem": (choice("nse", "ode"), "nse", "spectral flow or amplitude ODE"),
        "tol": (float, 1e-3, "tolerance per step"),
        "N": (int, 16, "modes per direction"),
        "nu": (float, 0.01, "viscosity"),
        "T": (float, 10.0, "final time"),
        "dt0": (float, None, "initial step (default 1e-4 T)"),
        "dt_max": (float, 0.1, "largest step"),
        "mode": (choice(*ex.MODE_ALIASES), "vsvo12", "stepping mode"),
    },
    "work-precision": {
        "problem": (choice("nse", "ode"), "nse", "spectral flow or amplitude ODE"),
        "tols": (float_list, "1e-1..1e-7", "adaptive tolerances"),
        "dts": (float_list, "0.1,0.05,0.02,0.01,0.005,0.002", "constant step sizes"),
        "N": (int, 16, "modes per direction"),
        "nu": (float, 0.01, "viscosity"),
        "T": (float, 10.0, "final time"),
        "dt_max": (float, 0.1, "largest adaptive step"),
    },
    "verify": {
        "seed": (int, 0, "random seed"),
        "trials": (int, 1000, "random trials per algebraic check"),
    },
    "overhead": {
        "N": (int, 64, "modes per direction"),
        "nu": (float, 0.1, "viscosity"),
        "dt": (float, 0.01, "step size"),
        "steps": (int, 50, "number of steps"),
        "option": (choice("A", "B"), "B", "pressure filter option"),
        "seed": (int, 0, "seed of the random initial field"),
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="befilter", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="file of key=value lines")
        for key, (_, default, help_) in {**opts, **COMMON}.items():
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, dest=key, default=None,
                           help=f"{help_} (default: {default})")
    return parser


def read_config(path: str) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge flags over config file over defaults and convert types."""
    opts = {**COMMANDS[command], **COMMON}
    from_file = read_config(args.config) if args.config else {}
    unknown = set(from_file) - set(opts)
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    cfg = {}
    for key, (conv, default, _) in opts.items():
        raw = getattr(args, key)
        if raw is None:
            raw = from_file.get(key, default)
        try:
            cfg[key] = None if raw is None else conv(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    validate(command, cfg)
    return cfg


def validate(command: str, cfg: dict) -> None:
    for key in ("N", "steps", "levels", "trials"):
        if key in cfg and cfg[key] is not None and cfg[key] < 1:
            raise ConfigError(f"{key} must be positive")
    for key in ("nu", "T", "dt"):
        if key in cfg and not cfg[key] > 0:
            raise ConfigError(f"{key} must be positive")
    for key in ("dts", "tols"):
        if key in cfg and (not cfg[key] or min(cfg[key]) <= 0):
            raise ConfigError(f"{key} must be a nonempty list of positive numbers")
    if "tol" in cfg or "tols" in cfg:
        T = cfg.get("T", 1.0)
        for tol in cfg.get("tols") or [cfg["tol"]]:
            ControllerConfig.for_interval(0.0, T, tol, dt_max=cfg.get("dt_max"))
    if cfg.get("dt0") is not None and not cfg["dt0"] > 0:
        raise ConfigError("dt0 must be positive")


def run_command(command: str, cfg: dict):
    """Run one experiment; returns ``(rows, schema, summary)``."""
    if command == "ode-converge":
        rows, summary = ex.ode_converge(cfg["problem"], cfg["dts"], cfg["T"])
        return rows, ex.ODE_SCHEMA, summary
    if command == "nse-converge":
        rows, summary = ex.nse_converge(cfg["N"], cfg["nu"], cfg["T"], cfg["dt"], cfg["levels"],
                                        cfg["variant"])
        return rows, ex.NSE_SCHEMA, summary
    if command == "nse-energy":
        rows, summary = ex.nse_energy(cfg["N"], cfg["nu"], cfg["dt"], cfg["steps"],
                                      cfg["forced"], cfg["option"], cfg["seed"],
                                      variant=cfg["variant"])
        return rows, ex.ENERGY_SCHEMA, summary
    if command == "adapt":
        rows, summary = ex.adapt(cfg["tol"], cfg["problem"], cfg["N"], cfg["nu"], cfg["T"],
                                 cfg["dt0"], cfg["dt_max"], cfg["mode"])
        return rows, ex.ADAPT_SCHEMA, summary
    if command == "work-precision":
        rows, summary = ex.work_precision(cfg["tols"], cfg["dts"], cfg["problem"], cfg["N"],
                                          cfg["nu"], cfg["T"], cfg["dt_max"])
        return rows, ex.WORK_SCHEMA, summary
    if command == "verify":
        results = run_all(cfg["seed"], cfg["trials"])
        rows = [{"check": r.name, "value": r.value, "threshold": r.threshold,
                 "passed": r.passed} for r in results]
        return rows, SCHEMAS["verify"], {
            "all_passed": all(r.passed for r in results)}
    if command == "overhead":
        rows, summary = ex.overhead(cfg["N"], cfg["nu"], cfg["dt"], cfg["steps"], cfg["seed"],
                                    cfg["option"])
        return rows, ex.OVERHEAD_SCHEMA, summary
    raise ConfigError(f"unknown command {command!r}")


SCHEMAS = {
    "ode-converge": ex.ODE_SCHEMA,
    "nse-converge": ex.NSE_SCHEMA,
    "nse-energy": ex.ENERGY_SCHEMA,
    "adapt": ex.ADAPT_SCHEMA,
    "work-precision": ex.WORK_SCHEMA,
    "verify": ["check", "value", "threshold", "passed"],
    "overhead": ex.OVERHEAD_SCHEMA,
}


def _emit(out, rows, schema, footer=None):
    if out:
        write_csv(out, rows, schema, footer)
    else:
        write_csv(sys.stdout, rows, schema, footer)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve(args.command, args)
    except (ConfigError, ValueError) as exc:
        print(f"befilter: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("running %s with %s", args.command, cfg)
    try:
        rows, schema, summary = run_command(args.command, cfg)
    except (IntegrationFailure, SolverFailure) as exc:
        partial = []
        traj = getattr(exc, "trajectory", None)
        if args.command == "adapt" and traj is not None:
            partial = [{"t": r.t, "dt": r.dt, "accepted": True, "order": r.order,
                        "est1": r.est1, "est2": r.est2, "in_window": False}
                       for r in traj.rows[1:]]
        _emit(cfg.get("out"), partial, SCHEMAS[args.command], footer=f"incomplete: {exc}")
        print(f"befilter: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _emit(cfg.get("out"), rows, schema)
    for k, v in summary.items():
        if k != "windows":
            log.info("%s = %s", k, v)
    if args.command == "verify" and not summary["all_passed"]:
        print("befilter: some checks failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
