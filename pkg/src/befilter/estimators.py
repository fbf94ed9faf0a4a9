"""Embedded local error estimates for the order-1 and order-2 values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

from .filters import est2_coefficients
from .lin_space import linear_combine, norm as rms_norm


def est1(y_be, y_filtered):
    """Order-1 estimate: filtered value minus backward Euler value."""
    return linear_combine([1.0, -1.0], [y_filtered, y_be])


def est2(y2, y_n, y_nm1, y_nm2, r_cur: float, r_prev: float):
    """Order-2 estimate from the filtered value and three back states.

    Returns ``None`` if ``y_nm2`` is missing: during startup the estimate is
    unavailable, which is different from being zero.
    """
    if y_nm2 is None or y_nm1 is None:
        return None
    a, b, c, d = est2_coefficients(r_cur, r_prev)
    return linear_combine([a, b, c, d], [y2, y_n, y_nm1, y_nm2])


@dataclass
class ErrorEstimates:
    est1_vec: Any
    est2_vec: Optional[Any]
    est1: float
    est2: Optional[float]

    @classmethod
    def from_vectors(cls, e1, e2=None, norm: Callable = rms_norm) -> "ErrorEstimates":
        return cls(e1, e2, norm(e1), None if e2 is None else norm(e2))
