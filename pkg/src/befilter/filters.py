"""Linear time filters applied to backward Euler output.

Ratios follow the causal convention used throughout the package:

* ``r_cur``  = (t[n+1] - t[n]) / (t[n] - t[n-1])
* ``r_prev`` = (t[n] - t[n-1]) / (t[n-1] - t[n-2])
"""

from __future__ import annotations

from fractions import Fraction

from .lin_space import linear_combine


def _check_ratio(*ratios):
    for r in ratios:
        if not r > 0:
            raise ValueError(f"step ratio must be positive, got {r!r}")


def filter_weight(r_cur):
    """Filter weight r/(2r+1); exactly 1/3 at r=1.

    Accepts :class:`fractions.Fraction` so the weight can be checked as an
    exact rational.
    """
    _check_ratio(r_cur)
    if isinstance(r_cur, (int, Fraction)):
        r_cur = Fraction(r_cur)
    return r_cur / (2 * r_cur + 1)


def filter_order2(y_be, y_n, y_nm1, r_cur: float):
    """Raise the backward Euler value to second order.

    ``y_be - w * (y_be - (1 + r) y_n + r y_nm1)`` with ``w = r / (2r + 1)``.
    The bracket is a scaled second difference, so data lying on a straight
    line in time is returned unchanged.
    """
    w = float(filter_weight(r_cur))
    r = float(r_cur)
    # differences first, so constant data gives an exactly zero bracket
    bracket = linear_combine([1.0, -r], [linear_combine([1.0, -1.0], [y_be, y_n]),
                                         linear_combine([1.0, -1.0], [y_n, y_nm1])])
    return linear_combine([1.0, -w], [y_be, bracket])


def est2_coefficients(r_cur: float, r_prev: float) -> tuple[float, float, float, float]:
    """Coefficients of the second-order estimator on (y2, y_n, y_nm1, y_nm2).

    The bracketed combination equals ``y2`` minus the quadratic through the
    three previous values extrapolated to the new time.
    """
    _check_ratio(r_cur, r_prev)
    c, p = float(r_cur), float(r_prev)
    pref = p * c * (1 + c) / (1 + 2 * c + p * (1 + 4 * c + 3 * c * c))
    s = 1 + p * (1 + c)
    return (
        pref,
        -pref * (1 + c) * s / (1 + p),
        pref * c * s,
        -pref * p * p * c * (1 + c) / (1 + p),
    )


def est2_prefactor(r_cur, r_prev):
    """Scalar prefactor of the second-order estimator (2/11 at unit ratios).

    Fractions in, Fraction out.
    """
    _check_ratio(r_cur, r_prev)
    if all(isinstance(r, (int, Fraction)) for r in (r_cur, r_prev)):
        c, p = Fraction(r_cur), Fraction(r_prev)
    else:
        c, p = float(r_cur), float(r_prev)
    return p * c * (1 + c) / (1 + 2 * c + p * (1 + 4 * c + 3 * c * c))


def filter_second(y2, y_n, y_nm1, y_nm2, r_cur: float, r_prev: float):
    """Second filter pass: ``y2 - EST2``.

    Leaves data sampled from any quadratic in time unchanged.
    """
    a, b, c, d = est2_coefficients(r_cur, r_prev)
    return linear_combine([1.0 - a, -b, -c, -d], [y2, y_n, y_nm1, y_nm2])


def stencil_I(w_np1, w_n, w_nm1):
    """Constant-step interpolation stencil (3/2, -1, 1/2)."""
    return linear_combine([1.5, -1.0, 0.5], [w_np1, w_n, w_nm1])


def stencil_D(w_np1, w_n, w_nm1):
    """Constant-step difference stencil (3/2, -2, 1/2); divide by dt for w_t."""
    return linear_combine([1.5, -2.0, 0.5], [w_np1, w_n, w_nm1])
