"""Step acceptance, order selection and step-size proposals.

An elementary controller: the next step is ``safety * dt * (tol/est)**(1/(p+1))``
with safety 0.9 after an accepted step and 0.7 after a rejection, clamped by
step-ratio and absolute bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional


class IntegrationFailure(RuntimeError):
    """Integration cannot continue. Carries the partial results if known."""

    def __init__(self, message, trajectory=None, stats=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.stats = stats


class StepSizeUnderflow(IntegrationFailure):
    pass


class TooManyRejections(IntegrationFailure):
    pass


@dataclass
class ControllerConfig:
    tol: float
    dt_min: float
    dt_max: float
    ratio_min: float = 0.1
    ratio_max: float = 5.0
    max_consecutive_rejects: int = 20
    safety_accept: float = 0.9
    safety_reject: float = 0.7

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if not 0 < self.dt_min < self.dt_max:
            raise ValueError(f"need 0 < dt_min < dt_max, got {self.dt_min}, {self.dt_max}")
        if not 0 < self.ratio_min < 1 < self.ratio_max:
            raise ValueError(
                f"need 0 < ratio_min < 1 < ratio_max, got {self.ratio_min}, {self.ratio_max}"
            )
        for name in ("safety_accept", "safety_reject"):
            s = getattr(self, name)
            if not 0 < s <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {s}")
        if self.max_consecutive_rejects < 1:
            raise ValueError("max_consecutive_rejects must be >= 1")

    @classmethod
    def for_interval(cls, t0: float, T: float, tol: float, **overrides) -> "ControllerConfig":
        """Defaults scaled to the integration interval."""
        span = T - t0
        kw = dict(tol=tol, dt_min=1e-14 * span, dt_max=0.5 * span)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


@dataclass
class StepOutcome:
    """Both embedded approximations of one attempted step and their estimates."""

    y_be: Any
    y2: Any
    est1: float
    est2: Optional[float] = None
    est1_vec: Any = None
    est2_vec: Any = None


@dataclass
class ControllerDecision:
    accepted: bool
    next_dt: float
    order: Optional[int] = None
    state: Any = None

    @property
    def verdict(self) -> str:
        return "accept" if self.accepted else "reject"


def clamp_dt(dt_new, dt, *, ratio_min=0.1, ratio_max=5.0, dt_min=0.0, dt_max=math.inf):
    dt_new = min(max(dt_new, ratio_min * dt), ratio_max * dt)
    return min(max(dt_new, dt_min), dt_max)


def propose_dt(dt: float, est: float, tol: float, order: int, safety: float, *,
               ratio_min: float = 0.1, ratio_max: float = 5.0,
               dt_min: float = 0.0, dt_max: float = math.inf) -> float:
    """Next step size for a method of the given order.

    ``est == 0`` counts as infinitely accurate and yields the ``ratio_max``
    clamp.
    """
    if est > 0:
        raw = safety * dt * (tol / est) ** (1.0 / (order + 1))
    else:
        raw = math.inf
    return clamp_dt(raw, dt, ratio_min=ratio_min, ratio_max=ratio_max,
                    dt_min=dt_min, dt_max=dt_max)


def _proposals(outcome: StepOutcome, cfg: ControllerConfig, dt: float, safety: float,
               passing_only: bool):
    bounds = dict(ratio_min=cfg.ratio_min, ratio_max=cfg.ratio_max,
                  dt_min=cfg.dt_min, dt_max=cfg.dt_max)
    out = {}
    for order, est in ((1, outcome.est1), (2, outcome.est2)):
        if est is None or (passing_only and not est < cfg.tol):
            continue
        out[order] = propose_dt(dt, est, cfg.tol, order, safety, **bounds)
    return out


def decide(outcome: StepOutcome, cfg: ControllerConfig, dt: float,
           consecutive_rejects: int = 0) -> ControllerDecision:
    """Accept or reject one attempted step.

    If any available estimate is below ``tol`` the step is accepted with the
    order whose proposed next step is largest (order 2 on ties). Otherwise
    the retry step is the largest of the rejection proposals.

    ``consecutive_rejects`` counts rejections preceding this attempt.

    Raises
    ------
    StepSizeUnderflow
        The retry step would fall below ``cfg.dt_min``.
    TooManyRejections
        This rejection exceeds ``cfg.max_consecutive_rejects``.
    """
    passing = _proposals(outcome, cfg, dt, cfg.safety_accept, passing_only=True)
    if passing:
        order = max(passing, key=lambda o: (passing[o], o))
        state = outcome.y_be if order == 1 else outcome.y2
        return ControllerDecision(True, passing[order], order, state)

    if consecutive_rejects + 1 > cfg.max_consecutive_rejects:
        raise TooManyRejections(
            f"{consecutive_rejects + 1} consecutive rejections (limit {cfg.max_consecutive_rejects})"
        )
    retry = max(_proposals(outcome, cfg, dt, cfg.safety_reject, passing_only=False).values())
    if retry <= cfg.dt_min and dt <= cfg.dt_min * (1 + 1e-12):
        raise StepSizeUnderflow(f"step size underflow at dt={dt:g}")
    return ControllerDecision(False, retry)
