"""Vector-space operations shared by filters, estimators and steppers.

States are plain numbers or numpy arrays (real or complex coefficients).
Everything downstream is written against :func:`linear_combine`, so a
scalar ODE, a dense system and a Fourier velocity field go through the
same filter code.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

#: relative epsilon for identity-type comparisons
EPS_REL = 1e-12


class DimensionMismatch(ValueError):
    """Raised when states of different shape are combined."""


def as_state(y) -> np.ndarray:
    """Coerce a scalar or sequence into a 1-D float state array."""
    arr = np.asarray(y)
    if not np.iscomplexobj(arr):
        arr = arr.astype(float)
    return np.atleast_1d(arr)


def _shape(v):
    return np.shape(v)


def linear_combine(coeffs: Sequence[float], states: Sequence) -> np.ndarray:
    """Return ``sum(c * s for c, s in zip(coeffs, states))``.

    Raises
    ------
    DimensionMismatch
        If the lists are empty, of unequal length, or the states do not
        share one shape.
    """
    if len(coeffs) == 0 or len(coeffs) != len(states):
        raise DimensionMismatch(
            f"need equal, nonempty lists (got {len(coeffs)} coeffs, {len(states)} states)"
        )
    shape = _shape(states[0])
    for s in states[1:]:
        if _shape(s) != shape:
            raise DimensionMismatch(f"shape {_shape(s)} does not match {shape}")
    out = coeffs[0] * np.asarray(states[0])
    for c, s in zip(coeffs[1:], states[1:]):
        out = out + c * np.asarray(s)
    return out


def norm_l2(v) -> float:
    """Unscaled Euclidean norm, scaled internally against under/overflow."""
    a = np.abs(np.asarray(v)).astype(float).ravel()
    if a.size == 0:
        return 0.0
    m = a.max()
    if m == 0 or not np.isfinite(m):
        return float(m)
    return float(m * np.sqrt(np.sum((a / m) ** 2)))


def norm(v) -> float:
    """RMS norm: Euclidean norm divided by sqrt(dimension).

    This is the default controller norm, so a single tolerance means the same
    thing for a scalar problem and for a large system.
    """
    v = np.asarray(v)
    if v.size == 0:
        return 0.0
    return norm_l2(v) / np.sqrt(v.size)


def inner(u, v) -> float:
    """Real Euclidean inner product, ``inner(v, v) == norm_l2(v)**2``."""
    if _shape(u) != _shape(v):
        raise DimensionMismatch(f"shape {_shape(u)} does not match {_shape(v)}")
    return float(np.real(np.vdot(np.asarray(v), np.asarray(u))))
